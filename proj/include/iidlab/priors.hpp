#pragma once

#include <array>

#include "iidlab/image.hpp"

namespace iid::priors {

inline constexpr float kDefaultEps = 1e-4f;

/// Cross colour ratios between a pixel and one neighbour direction.
struct DirectionalRatios {
  GrayImage rg;
  GrayImage rb;
  GrayImage gb;
};

struct CcrMaps {
  DirectionalRatios right;
  DirectionalRatios down;
  /// Sum over both directions of |log m_rg| + |log m_rb| + |log m_gb|.
  GrayImage strength;
};

struct CannyParams {
  float sigma = 1.4f;
  float lo = 0.1f;
  float hi = 0.2f;
};

/// Binary edge maps at full, 1/2 and 1/4 resolution.
struct EdgePyramid {
  GrayImage full;
  GrayImage half;
  GrayImage quarter;
};

struct PriorBundle {
  CcrMaps ccr;
  ImageRGB r_est;
  GrayImage s_est;
  ImageRGB nrgb;
  /// Only populated on the ground-truth side (from reflectance), empty otherwise.
  EdgePyramid edge_pyramid;
};

/// Ratios use channels clamped below at eps; the last row/column compares a
/// pixel with itself, so the ratio there is 1.
CcrMaps ccr_maps(const ImageRGB& img, float eps = kDefaultEps);

/// Per-segment channel mean spread over the segment.
ImageRGB mean_reflectance_estimate(const ImageRGB& img, const SegmentMap& seg);

/// Shading implied by I = R * S: channel mean of img / max(r_est, eps), clamped to [0, 10].
GrayImage inverse_shading_estimate(const ImageRGB& img, const ImageRGB& r_est,
                                   float eps = kDefaultEps);

inline constexpr float kMaxShadingEstimate = 10.0f;

/// Chromaticity c / max(R+G+B, eps).
ImageRGB normalized_rgb(const ImageRGB& img, float eps = kDefaultEps);

/// Canny on luminance (blur, Sobel, non-maximum suppression, hysteresis on the
/// gradient magnitude normalised by its maximum), then area-downsampled by 2 and
/// 4 and re-binarised at 0.25. Throws DegenerateImage below 16 pixels.
EdgePyramid canny_edge_pyramid(const ImageRGB& reflectance, const CannyParams& params = {});

/// Single-scale binary Canny map of a gray image.
GrayImage canny(const GrayImage& gray, const CannyParams& params = {});

/// 2x2 (factor 2) or 4x4 (factor 4) block average; dimensions must divide evenly.
GrayImage area_downsample(const GrayImage& img, int factor);

/// Everything except the edge pyramid, computed from the input image.
PriorBundle compute_bundle(const ImageRGB& img, const SegmentMap& seg, float eps = kDefaultEps);

}  // namespace iid::priors
