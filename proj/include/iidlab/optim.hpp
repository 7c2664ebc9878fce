#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "iidlab/tensor.hpp"

namespace iid::ad {

/// Trainable leaf tensor with its Adam moments.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> tensor;
  std::vector<T> m;
  std::vector<T> v;
  std::int64_t step = 0;

  Param(std::string name_, Shape shape, std::vector<T> init)
      : name(std::move(name_)),
        tensor(Tensor<T>::from(shape, std::move(init), true)),
        m(tensor.numel(), T(0)),
        v(tensor.numel(), T(0)) {}
};

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam; clears gradients afterwards. Throws MissingGrad if a
/// parameter received no gradient since the last step.
template <typename T>
void adam_step(std::span<Param<T>* const> params, const AdamOptions& opt = {});

template <typename T>
void zero_grad(std::span<Param<T>* const> params) {
  for (Param<T>* p : params) p->tensor.zero_grad();
}

}  // namespace iid::ad
