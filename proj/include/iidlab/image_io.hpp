#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "iidlab/image.hpp"

namespace iid::io {

/// 8-bit RGB/RGBA (or gray, replicated) PNG mapped v/255; alpha dropped.
ImageRGB load_png(const std::filesystem::path& path);

/// Clamps to [0,1] and stores round(v*255) with halves rounded up.
void save_png(const ImageRGB& img, const std::filesystem::path& path);
void save_png(const GrayImage& img, const std::filesystem::path& path);

std::uint8_t quantize_byte(float v);

using PfmImage = std::variant<ImageRGB, GrayImage>;

PfmImage load_pfm(const std::filesystem::path& path);
ImageRGB load_pfm_rgb(const std::filesystem::path& path);
GrayImage load_pfm_gray(const std::filesystem::path& path);

/// Little-endian payload, scale -1, bottom-up scanlines.
void save_pfm(const ImageRGB& img, const std::filesystem::path& path);
void save_pfm(const GrayImage& img, const std::filesystem::path& path);

/// 16-bit gray label image.
void save_label_png(int height, int width, std::span<const std::int32_t> labels,
                    const std::filesystem::path& path);
/// Returns (height, width, raw labels).
struct RawLabels {
  int height = 0;
  int width = 0;
  std::vector<std::int64_t> labels;
};
RawLabels load_label_png(const std::filesystem::path& path);

/// Segment maps with more distinct labels than this are rejected.
inline constexpr int kMaxSegments = 4096;

/// 16-bit label PNG plus a JSON sidecar {"<label>": "wall"|"ceiling"|"other"}.
/// Labels are compacted in first-seen order; labels missing from the sidecar are Other.
SegmentMap load_segments(const std::filesystem::path& png_path,
                         const std::filesystem::path& sidecar_path);
/// Sidecar path defaults to the PNG path with its extension replaced by ".json".
SegmentMap load_segments(const std::filesystem::path& png_path);
void save_segments(const SegmentMap& seg, const std::filesystem::path& png_path,
                   const std::filesystem::path& sidecar_path);

}  // namespace iid::io
