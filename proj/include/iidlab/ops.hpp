#pragma once

#include <vector>

#include "iidlab/tensor.hpp"

namespace iid::ad {

enum class Mode { Train, Eval };

/// Cross-correlation with zero padding. w: Cout x Cin x k x k; b: 1 x Cout x 1 x 1
/// or undefined. Output spatial size floor((H + 2p - k) / s) + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int pad);

/// Transposed convolution, the adjoint of conv2d with the same kernel.
/// w: Cin x Cout x k x k. Output size s (H - 1) + k - 2p.
template <typename T>
Tensor<T> deconv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride = 2,
                   int pad = 1);

/// Running statistics, detached from the graph.
template <typename T>
struct BatchNormState {
  std::vector<T> running_mean;
  std::vector<T> running_var;

  explicit BatchNormState(int channels = 0)
      : running_mean(channels, T(0)), running_var(channels, T(1)) {}
};

/// Train mode normalises with biased batch statistics and updates the running
/// ones; eval mode uses the running statistics. gamma, beta: 1 x C x 1 x 1.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, Mode mode, T momentum = T(0.1), T eps = T(1e-5));

template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> abs(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);
/// max(x, lo); the gradient is passed only where x > lo.
template <typename T> Tensor<T> clamp_min(const Tensor<T>& x, T lo);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T offset);

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

/// Channel-axis concatenation; all inputs share N, H, W.
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& xs);

/// 2x2 block mean; H and W must be even.
template <typename T> Tensor<T> downsample2x(const Tensor<T>& x);

/// N x C x H x W -> N x 1 x H x W.
template <typename T> Tensor<T> channel_sum(const Tensor<T>& x);
/// N x 1 x H x W -> N x C x H x W.
template <typename T> Tensor<T> broadcast_channels(const Tensor<T>& x, int channels);

enum class Axis { X, Y };
/// Forward difference x[p + 1] - x[p] along the axis; zero on the last row/column.
template <typename T> Tensor<T> shift_diff(const Tensor<T>& x, Axis axis);

/// Depthwise separable Gaussian; weights renormalised over in-bounds taps.
template <typename T> Tensor<T> gaussian_blur(const Tensor<T>& x, double sigma, int radius);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
/// Mean squared difference over all elements.
template <typename T> Tensor<T> mse(const Tensor<T>& x, const Tensor<T>& target);

namespace testing {
/// Deliberate defects used to prove the gradient checker detects them.
enum class Fault { None, ConvBackwardSignFlip };
void set_fault(Fault fault);
Fault fault();
}  // namespace testing

}  // namespace iid::ad
