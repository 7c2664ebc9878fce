#include "iidlab/layers.hpp"

#include <cmath>

namespace iid::ad {

template <typename T>
Param<T>& ParamStore<T>::kaiming(const std::string& name, Shape shape, double fan_in) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  std::vector<T> init(shape.numel());
  for (T& v : init) v = static_cast<T>(dist(rng_));
  return params_.emplace_back(name, shape, std::move(init));
}

template <typename T>
Param<T>& ParamStore<T>::constant(const std::string& name, Shape shape, T value) {
  return params_.emplace_back(name, shape, std::vector<T>(shape.numel(), value));
}

template <typename T>
BatchNormState<T>& ParamStore<T>::batchnorm_state(const std::string& name, int channels) {
  return buffers_.emplace_back(Buffer{name, BatchNormState<T>(channels)}).state;
}

template <typename T>
std::vector<Param<T>*> ParamStore<T>::params() {
  std::vector<Param<T>*> out;
  for (Param<T>& p : params_) out.push_back(&p);
  return out;
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const Param<T>& p : params_) n += p.tensor.numel();
  return n;
}

template <typename T>
Conv2d<T>::Conv2d(ParamStore<T>& store, const std::string& name, int in, int out, int kernel,
                  int stride, int pad, bool bias)
    : in_(in), out_(out), stride_(stride), pad_(pad) {
  w_ = &store.kaiming(name + ".weight", Shape{out, in, kernel, kernel},
                      static_cast<double>(in) * kernel * kernel);
  if (bias) b_ = &store.constant(name + ".bias", Shape{1, out, 1, 1}, T(0));
}

template <typename T>
Tensor<T> Conv2d<T>::operator()(const Tensor<T>& x) const {
  return conv2d(x, w_->tensor, b_ ? b_->tensor : Tensor<T>(), stride_, pad_);
}

template <typename T>
Deconv2d<T>::Deconv2d(ParamStore<T>& store, const std::string& name, int in, int out, int kernel,
                      int stride, int pad, bool bias)
    : stride_(stride), pad_(pad) {
  // Each output pixel sees about in * k^2 / s^2 taps.
  w_ = &store.kaiming(name + ".weight", Shape{in, out, kernel, kernel},
                      static_cast<double>(in) * kernel * kernel / (stride * stride));
  if (bias) b_ = &store.constant(name + ".bias", Shape{1, out, 1, 1}, T(0));
}

template <typename T>
Tensor<T> Deconv2d<T>::operator()(const Tensor<T>& x) const {
  return deconv2d(x, w_->tensor, b_ ? b_->tensor : Tensor<T>(), stride_, pad_);
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(ParamStore<T>& store, const std::string& name, int channels) {
  gamma_ = &store.constant(name + ".gamma", Shape{1, channels, 1, 1}, T(1));
  beta_ = &store.constant(name + ".beta", Shape{1, channels, 1, 1}, T(0));
  state_ = &store.batchnorm_state(name, channels);
}

template <typename T>
Tensor<T> BatchNorm2d<T>::operator()(const Tensor<T>& x, Mode mode) const {
  return batchnorm2d(x, gamma_->tensor, beta_->tensor, *state_, mode);
}

template <typename T>
ConvBnRelu<T>::ConvBnRelu(ParamStore<T>& store, const std::string& name, int in, int out, int stride)
    : conv_(store, name + ".conv", in, out, 3, stride, 1, false), bn_(store, name + ".bn", out) {}

template <typename T>
Tensor<T> ConvBnRelu<T>::operator()(const Tensor<T>& x, Mode mode) const {
  return relu(bn_(conv_(x), mode));
}

template <typename T>
DeconvBnRelu<T>::DeconvBnRelu(ParamStore<T>& store, const std::string& name, int in, int out)
    : deconv_(store, name + ".deconv", in, out), bn_(store, name + ".bn", out) {}

template <typename T>
Tensor<T> DeconvBnRelu<T>::operator()(const Tensor<T>& x, Mode mode) const {
  return relu(bn_(deconv_(x), mode));
}

template class ParamStore<float>;
template class ParamStore<double>;
template class Conv2d<float>;
template class Conv2d<double>;
template class Deconv2d<float>;
template class Deconv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class ConvBnRelu<float>;
template class ConvBnRelu<double>;
template class DeconvBnRelu<float>;
template class DeconvBnRelu<double>;

}  // namespace iid::ad
