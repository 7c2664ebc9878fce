#include "iidlab/image.hpp"

#include <algorithm>
#include <cctype>

namespace iid {

std::string_view to_string(SemanticClass cls) {
  switch (cls) {
    case SemanticClass::Wall: return "wall";
    case SemanticClass::Ceiling: return "ceiling";
    case SemanticClass::Other: return "other";
  }
  return "other";
}

SemanticClass parse_semantic_class(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "wall") return SemanticClass::Wall;
  if (lower == "ceiling") return SemanticClass::Ceiling;
  if (lower == "other") return SemanticClass::Other;
  throw Error(ErrorCode::MalformedSidecar, "unknown semantic class '" + std::string(name) + "'");
}

SegmentMap::SegmentMap(int height, int width, std::vector<std::int32_t> labels,
                       std::vector<SemanticClass> classes)
    : height_(height), width_(width), labels_(std::move(labels)), classes_(std::move(classes)) {
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::DegenerateImage, "segment map dimensions must be positive");
  }
  if (labels_.size() != static_cast<size_t>(height) * width) {
    throw Error(ErrorCode::SizeMismatch, "segment label count does not match dimensions");
  }
  std::vector<bool> seen(classes_.size(), false);
  for (std::int32_t l : labels_) {
    if (l < 0 || static_cast<size_t>(l) >= classes_.size()) {
      throw Error(ErrorCode::BadInput, "segment label " + std::to_string(l) + " has no class entry");
    }
    seen[l] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw Error(ErrorCode::BadInput, "segment labels are not contiguous");
  }
}

SegmentMap SegmentMap::from_raw(int height, int width, std::span<const std::int64_t> raw_labels,
                                const std::unordered_map<std::int64_t, SemanticClass>& classes_by_raw) {
  std::unordered_map<std::int64_t, std::int32_t> remap;
  std::vector<std::int32_t> labels;
  std::vector<SemanticClass> classes;
  labels.reserve(raw_labels.size());
  for (std::int64_t raw : raw_labels) {
    if (raw < 0) throw Error(ErrorCode::BadInput, "negative segment label");
    auto [it, inserted] = remap.try_emplace(raw, static_cast<std::int32_t>(remap.size()));
    if (inserted) {
      auto cls = classes_by_raw.find(raw);
      classes.push_back(cls != classes_by_raw.end() ? cls->second : SemanticClass::Other);
    }
    labels.push_back(it->second);
  }
  return SegmentMap(height, width, std::move(labels), std::move(classes));
}

std::vector<size_t> SegmentMap::segment_sizes() const {
  std::vector<size_t> sizes(classes_.size(), 0);
  for (std::int32_t l : labels_) ++sizes[l];
  return sizes;
}

void check_consistent(const IntrinsicSample& s) {
  const int h = s.image.height(), w = s.image.width();
  if (!s.reflectance.same_size(h, w) || !s.shading.same_size(h, w) ||
      s.segments.height() != h || s.segments.width() != w) {
    throw Error(ErrorCode::SizeMismatch, "intrinsic sample rasters disagree on size");
  }
}

GrayImage luminance(const ImageRGB& img) {
  GrayImage out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.at(y, x) = 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
    }
  }
  return out;
}

}  // namespace iid
