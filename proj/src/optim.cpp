#include "iidlab/optim.hpp"

#include <cmath>

namespace iid::ad {

template <typename T>
void adam_step(std::span<Param<T>* const> params, const AdamOptions& opt) {
  for (Param<T>* p : params) {
    if (!p->tensor.has_grad()) {
      throw Error(ErrorCode::MissingGrad, "parameter '" + p->name + "' has no gradient");
    }
  }
  for (Param<T>* p : params) {
    ++p->step;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(p->step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(p->step));
    const auto g = p->tensor.grad();
    auto w = p->tensor.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double m = opt.beta1 * p->m[i] + (1.0 - opt.beta1) * gi;
      const double v = opt.beta2 * p->v[i] + (1.0 - opt.beta2) * gi * gi;
      p->m[i] = static_cast<T>(m);
      p->v[i] = static_cast<T>(v);
      const double update = opt.lr * (m / bc1) / (std::sqrt(v / bc2) + opt.eps);
      w[i] = static_cast<T>(w[i] - update);
    }
    p->tensor.zero_grad();
  }
}

template void adam_step(std::span<Param<float>* const>, const AdamOptions&);
template void adam_step(std::span<Param<double>* const>, const AdamOptions&);

}  // namespace iid::ad
