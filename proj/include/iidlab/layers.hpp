#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "iidlab/ops.hpp"
#include "iidlab/optim.hpp"

namespace iid::ad {

/// Owns every parameter and batch-norm buffer of a model, in creation order.
template <typename T>
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : rng_(seed) {}

  /// Kaiming fan-in normal weights.
  Param<T>& kaiming(const std::string& name, Shape shape, double fan_in);
  Param<T>& constant(const std::string& name, Shape shape, T value);

  struct Buffer {
    std::string name;
    BatchNormState<T> state;
  };
  BatchNormState<T>& batchnorm_state(const std::string& name, int channels);

  std::vector<Param<T>*> params();
  std::deque<Param<T>>& param_list() { return params_; }
  const std::deque<Param<T>>& param_list() const { return params_; }
  std::deque<Buffer>& buffers() { return buffers_; }
  const std::deque<Buffer>& buffers() const { return buffers_; }
  std::size_t parameter_count() const;

 private:
  std::mt19937_64 rng_;
  std::deque<Param<T>> params_;  // deque keeps addresses stable
  std::deque<Buffer> buffers_;
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamStore<T>& store, const std::string& name, int in, int out, int kernel, int stride,
         int pad, bool bias);
  Tensor<T> operator()(const Tensor<T>& x) const;

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  Param<T>* weight() const { return w_; }
  Param<T>* bias() const { return b_; }

 private:
  Param<T>* w_ = nullptr;
  Param<T>* b_ = nullptr;
  int in_ = 0, out_ = 0, stride_ = 1, pad_ = 0;
};

template <typename T>
class Deconv2d {
 public:
  Deconv2d() = default;
  Deconv2d(ParamStore<T>& store, const std::string& name, int in, int out, int kernel = 4,
           int stride = 2, int pad = 1, bool bias = false);
  Tensor<T> operator()(const Tensor<T>& x) const;

 private:
  Param<T>* w_ = nullptr;
  Param<T>* b_ = nullptr;
  int stride_ = 2, pad_ = 1;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(ParamStore<T>& store, const std::string& name, int channels);
  Tensor<T> operator()(const Tensor<T>& x, Mode mode) const;

 private:
  Param<T>* gamma_ = nullptr;
  Param<T>* beta_ = nullptr;
  BatchNormState<T>* state_ = nullptr;
};

/// conv -> batch norm -> ReLU.
template <typename T>
class ConvBnRelu {
 public:
  ConvBnRelu() = default;
  ConvBnRelu(ParamStore<T>& store, const std::string& name, int in, int out, int stride);
  Tensor<T> operator()(const Tensor<T>& x, Mode mode) const;

 private:
  Conv2d<T> conv_;
  BatchNorm2d<T> bn_;
};

/// 4x4 stride-2 transposed conv -> batch norm -> ReLU; doubles the resolution.
template <typename T>
class DeconvBnRelu {
 public:
  DeconvBnRelu() = default;
  DeconvBnRelu(ParamStore<T>& store, const std::string& name, int in, int out);
  Tensor<T> operator()(const Tensor<T>& x, Mode mode) const;

 private:
  Deconv2d<T> deconv_;
  BatchNorm2d<T> bn_;
};

}  // namespace iid::ad
