#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "iidlab/error.hpp"

namespace iid {

/// Dense row-major float raster with interleaved channels.
template <int Channels>
class Raster {
 public:
  static constexpr int kChannels = Channels;

  Raster() = default;
  Raster(int height, int width, float fill = 0.0f)
      : height_(height), width_(width) {
    if (height < 1 || width < 1) {
      throw Error(ErrorCode::DegenerateImage,
                  "raster dimensions must be positive, got " + std::to_string(height) +
                      "x" + std::to_string(width));
    }
    data_.assign(static_cast<size_t>(height) * width * Channels, fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  size_t pixel_count() const { return static_cast<size_t>(height_) * width_; }
  bool empty() const { return data_.empty(); }

  float& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool same_size(int height, int width) const { return height_ == height && width_ == width; }
  template <int Other>
  bool same_size(const Raster<Other>& other) const {
    return same_size(other.height(), other.width());
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  size_t index(int y, int x, int c) const {
    return (static_cast<size_t>(y) * width_ + x) * Channels + c;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

using ImageRGB = Raster<3>;
using GrayImage = Raster<1>;

enum class SemanticClass : std::uint8_t { Other = 0, Wall = 1, Ceiling = 2 };

std::string_view to_string(SemanticClass cls);
/// Case-insensitive; throws MalformedSidecar for unknown names.
SemanticClass parse_semantic_class(std::string_view name);

/// Per-pixel segment labels 0..K-1 plus the label -> class table.
class SegmentMap {
 public:
  SegmentMap() = default;
  /// Labels must already be contiguous; classes.size() must cover max label + 1.
  SegmentMap(int height, int width, std::vector<std::int32_t> labels,
             std::vector<SemanticClass> classes);

  /// Relabels arbitrary non-negative ids to 0..K-1 in first-seen raster order.
  static SegmentMap from_raw(int height, int width, std::span<const std::int64_t> raw_labels,
                             const std::unordered_map<std::int64_t, SemanticClass>& classes_by_raw = {});

  int height() const { return height_; }
  int width() const { return width_; }
  int segment_count() const { return static_cast<int>(classes_.size()); }

  std::int32_t label(int y, int x) const { return labels_[static_cast<size_t>(y) * width_ + x]; }
  std::span<const std::int32_t> labels() const { return labels_; }
  std::span<const SemanticClass> classes() const { return classes_; }
  SemanticClass class_of(std::int32_t label) const { return classes_[label]; }
  SemanticClass class_at(int y, int x) const { return classes_[label(y, x)]; }

  /// Pixel count of each segment.
  std::vector<size_t> segment_sizes() const;

  friend bool operator==(const SegmentMap&, const SegmentMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::int32_t> labels_;
  std::vector<SemanticClass> classes_;
};

struct IntrinsicSample {
  ImageRGB image;
  ImageRGB reflectance;
  GrayImage shading;
  SegmentMap segments;
};

/// Throws SizeMismatch unless all four rasters agree on dimensions.
void check_consistent(const IntrinsicSample& sample);

/// 0.299 R + 0.587 G + 0.114 B.
GrayImage luminance(const ImageRGB& img);

template <int C>
Raster<C> clamp01(const Raster<C>& img) {
  Raster<C> out = img;
  for (float& v : out.data()) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return out;
}

}  // namespace iid
