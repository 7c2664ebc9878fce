#pragma once

#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "iidlab/image.hpp"
#include "iidlab/priors.hpp"
#include "iidlab/signet.hpp"
#include "iidlab/tensor.hpp"

namespace iid::loss {

using ad::Tensor;

struct LossWeights {
  double lambda_e = 0.4;
  double lambda_i = 0.5;
  /// Perceptual weight; kept for the report layout, no perceptual term is computed.
  double lambda_p = 0.05;
  double lambda_dssim = 0.4;

  void validate() const;
};

nlohmann::json to_json(const LossWeights& w);
LossWeights loss_weights_from_json(const nlohmann::json& j);

struct LossReport {
  double l_e = 0, l_i = 0, l_f = 0, l_norm = 0, l_tv = 0, l_dssim = 0, total = 0;
};

/// Fills `total` from the components.
LossReport total_loss(LossReport parts, const LossWeights& w);

/// Segment labels and wall/ceiling flags for a batch, row-major per sample.
struct SegmentBatch {
  int n = 0, h = 0, w = 0;
  std::vector<int> labels;
  std::vector<int> segment_counts;
  std::vector<std::uint8_t> homogeneous;

  static SegmentBatch from(std::span<const SegmentMap* const> maps);
};

template <typename T>
struct Targets {
  Tensor<T> image, reflectance, shading;
  Tensor<T> edge_full, edge_half, edge_quarter;
  SegmentBatch segments;
};

/// Edge targets are the Canny pyramids of the ground-truth reflectances.
template <typename T>
Targets<T> make_targets(std::span<const IntrinsicSample* const> samples,
                        std::span<const priors::EdgePyramid* const> edges);

template <typename T>
Tensor<T> edge_loss(const net::ForwardOutputs<T>& out, const Targets<T>& gt);

template <typename T>
Tensor<T> initial_loss(const Tensor<T>& r_initial, const Tensor<T>& s_initial, const Tensor<T>& gt_r,
                       const Tensor<T>& gt_s);

template <typename T>
Tensor<T> final_loss(const Tensor<T>& r_final, const Tensor<T>& s_final, const Tensor<T>& gt_r,
                     const Tensor<T>& gt_s, const Tensor<T>& image);

/// Chromaticity of the prediction against the image, mean within each segment and summed
/// over segments (averaged over the batch).
template <typename T>
Tensor<T> norm_invariance_loss(const Tensor<T>& r_final, const Tensor<T>& image,
                               const SegmentBatch& seg, T eps = T(priors::kDefaultEps));

/// Per-pixel anisotropic variation |dx| + |dy| per channel, counting only neighbour pairs
/// inside the same wall or ceiling segment.
template <typename T>
Tensor<T> total_variation(const Tensor<T>& x, const SegmentBatch& seg);

/// MSE between total variations over wall and ceiling pixels; 0 when there are none.
template <typename T>
Tensor<T> tv_loss(const Tensor<T>& r_final, const Tensor<T>& gt_r, const SegmentBatch& seg);

inline constexpr int kSsimRadius = 5;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean SSIM over batch, channels and pixels.
template <typename T>
Tensor<T> ssim(const Tensor<T>& x, const Tensor<T>& y);
template <typename T>
Tensor<T> dssim_loss(const Tensor<T>& x, const Tensor<T>& y);

template <typename T>
struct LossTerms {
  Tensor<T> l_e, l_i, l_f, l_norm, l_tv, l_dssim, total;

  LossReport report() const;
};

/// Edge terms are omitted (zero) when `with_edges` is false.
template <typename T>
LossTerms<T> compute_losses(const net::ForwardOutputs<T>& out, const Targets<T>& gt,
                            const LossWeights& w, bool with_edges = true);

}  // namespace iid::loss
