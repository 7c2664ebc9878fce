#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "iidlab/gradcheck.hpp"
#include "iidlab/layers.hpp"
#include "iidlab/ops.hpp"
#include "iidlab/optim.hpp"

using namespace iid;
using namespace iid::ad;
using testutil::random_tensor;

namespace {

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.values()[i] * b.values()[i];
  return s;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::BadInput;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("1x1 identity convolution") {
  std::mt19937_64 rng(1);
  const auto x = random_tensor(rng, {2, 3, 4, 5});
  std::vector<double> w(9, 0.0);
  for (int c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
  const auto y = conv2d(x, Tensor<double>::from({3, 3, 1, 1}, w), Tensor<double>(), 1, 0);
  CHECK(y.shape() == x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("all-ones 3x3 kernel sums the neighbourhood") {
  const auto x = Tensor<double>::full({1, 1, 5, 5}, 0.7);
  const auto y = conv2d(x, Tensor<double>::full({1, 1, 3, 3}, 1.0), Tensor<double>(), 1, 1);
  CHECK(y.at(0, 0, 2, 2) == doctest::Approx(9 * 0.7));
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(4 * 0.7));
}

TEST_CASE("conv output size") {
  const auto y = conv2d(Tensor<double>::zeros({1, 2, 9, 8}), Tensor<double>::zeros({4, 2, 3, 3}), Tensor<double>(), 2, 1);
  CHECK(y.shape() == Shape{1, 4, 5, 4});
  CHECK(code_of([] {
          conv2d(Tensor<double>::zeros({1, 2, 5, 5}), Tensor<double>::zeros({4, 3, 3, 3}), Tensor<double>(), 1, 1);
        }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("deconvolution is the adjoint of convolution") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 5; ++t) {
    const auto w = random_tensor(rng, {3, 2, 4, 4});  // deconv: Cin=3 -> Cout=2; conv: 2 -> 3
    const auto x = random_tensor(rng, {2, 3, 5, 5});
    const auto y = random_tensor(rng, {2, 2, 10, 10});
    const auto dx = deconv2d(x, w, Tensor<double>(), 2, 1);
    CHECK(dx.shape() == Shape{2, 2, 10, 10});
    const auto cy = conv2d(y, w, Tensor<double>(), 2, 1);
    CHECK(std::abs(dot(dx, y) - dot(x, cy)) <= 1e-6 * std::max(1.0, std::abs(dot(dx, y))));
  }
}

TEST_CASE("batchnorm train mode standardises each channel") {
  std::mt19937_64 rng(3);
  const auto x = random_tensor(rng, {3, 2, 4, 4}, -2.0, 5.0);
  BatchNormState<double> state(2);
  const auto y = batchnorm2d(x, Tensor<double>::full({1, 2, 1, 1}, 1.0), Tensor<double>::zeros({1, 2, 1, 1}),
                             state, Mode::Train);
  for (int c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    for (int n = 0; n < 3; ++n) {
      for (int i = 0; i < 16; ++i) m += y.at(n, c, i / 4, i % 4);
    }
    m /= 48;
    for (int n = 0; n < 3; ++n) {
      for (int i = 0; i < 16; ++i) v += std::pow(y.at(n, c, i / 4, i % 4) - m, 2);
    }
    v /= 48;
    CHECK(std::abs(m) <= 1e-5);
    CHECK(std::abs(v - 1.0) <= 1e-3);
    CHECK(state.running_mean[c] != 0.0);
  }
}

TEST_CASE("batchnorm eval with unit statistics is the identity") {
  std::mt19937_64 rng(4);
  const auto x = random_tensor(rng, {2, 3, 3, 3});
  BatchNormState<double> state(3);
  const auto y = batchnorm2d(x, Tensor<double>::full({1, 3, 1, 1}, 1.0), Tensor<double>::zeros({1, 3, 1, 1}), state,
                             Mode::Eval, 0.1, 0.0);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.values()[i] == doctest::Approx(x.values()[i]));
}

TEST_CASE("batchnorm needs two values per channel in train mode") {
  BatchNormState<double> state(1);
  CHECK(code_of([&] {
          batchnorm2d(Tensor<double>::zeros({1, 1, 1, 1}), Tensor<double>::full({1, 1, 1, 1}, 1.0),
                      Tensor<double>::zeros({1, 1, 1, 1}), state, Mode::Train);
        }) == ErrorCode::DegenerateBatch);
}

TEST_CASE("pointwise values") {
  const auto x = Tensor<double>::from({1, 1, 1, 3}, {-1.0, 0.0, 2.0});
  CHECK(relu(x).values()[0] == 0.0);
  CHECK(relu(x).values()[2] == 2.0);
  CHECK(sigmoid(x).values()[1] == 0.5);
  CHECK(downsample2x(Tensor<double>::from({1, 1, 2, 2}, {1, 2, 3, 6})).item() == 3.0);
  CHECK(mse(x, x).item() == 0.0);
  CHECK(mse(add_scalar(x, 1.0), x).item() == 1.0);
  CHECK(code_of([&] { add(x, Tensor<double>::zeros({1, 1, 1, 2})); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("first adam step moves by the learning rate") {
  ParamStore<double> store(0);
  Param<double>& p = store.constant("p", {1, 1, 1, 1}, 0.5);
  Param<double>* ps[] = {&p};
  p.tensor.mutable_grad()[0] = 1.0;
  adam_step<double>(ps);
  CHECK(std::abs(p.tensor.item() - (0.5 - 2e-4)) <= 1e-9);
  CHECK_FALSE(p.tensor.has_grad());
  CHECK(p.step == 1);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  ParamStore<double> store(0);
  Param<double>& p = store.constant("p", {1, 1, 2, 2}, 0.25);
  Param<double>* ps[] = {&p};
  p.tensor.mutable_grad();
  adam_step<double>(ps);
  for (double v : p.tensor.values()) CHECK(v == 0.25);
}

TEST_CASE("identical parameters with identical gradients stay identical") {
  ParamStore<double> store(0);
  Param<double>& a = store.constant("a", {1, 1, 1, 3}, 0.1);
  Param<double>& b = store.constant("b", {1, 1, 1, 3}, 0.1);
  Param<double>* ps[] = {&a, &b};
  for (int step = 0; step < 3; ++step) {
    for (Param<double>* p : ps) {
      auto g = p->tensor.mutable_grad();
      for (std::size_t i = 0; i < 3; ++i) g[i] = 0.3 * (i + 1) - step;
    }
    adam_step<double>(ps);
  }
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.tensor.values()[i] == b.tensor.values()[i]);
}

TEST_CASE("adam refuses parameters without gradients") {
  ParamStore<double> store(0);
  Param<double>& p = store.constant("p", {1, 1, 1, 1}, 0.0);
  Param<double>* ps[] = {&p};
  CHECK(code_of([&] { adam_step<double>(ps); }) == ErrorCode::MissingGrad);
}

TEST_CASE("gradients accumulate across uses") {
  const auto x = Tensor<double>::from({1, 1, 1, 2}, {0.3, -0.7}, true);
  sum(add(mul(x, x), scale(x, 3.0))).backward();
  CHECK(x.grad()[0] == doctest::Approx(2 * 0.3 + 3));
  CHECK(x.grad()[1] == doctest::Approx(2 * -0.7 + 3));
}

TEST_CASE("forward is deterministic") {
  ParamStore<float> s1(9), s2(9);
  ConvBnRelu<float> a(s1, "l", 3, 4, 2), b(s2, "l", 3, 4, 2);
  std::mt19937_64 rng(5);
  std::vector<float> v(2 * 3 * 8 * 8);
  for (float& f : v) f = std::uniform_real_distribution<float>(-1, 1)(rng);
  const auto x = Tensor<float>::from({2, 3, 8, 8}, v);
  const auto ya = a(x, Mode::Train), yb = b(x, Mode::Train);
  CHECK(std::equal(ya.values().begin(), ya.values().end(), yb.values().begin()));
}

TEST_CASE("finite-difference check of conv2d on 1x2x5x5") {
  std::mt19937_64 rng(6);
  const double err = gc::max_relative_error(
      [](const auto& in) { return conv2d(in[0], in[1], in[2], 1, 1); },
      {random_tensor(rng, {1, 2, 5, 5}), random_tensor(rng, {3, 2, 3, 3}), random_tensor(rng, {1, 3, 1, 1})}, rng);
  CHECK(err <= 1e-4);
}

TEST_CASE("operation gradient suite") {
  gc::SuiteOptions opt;
  opt.include_network = false;
  for (const auto& r : gc::run_suite(opt)) {
    INFO(r.name << " max error " << r.max_error);
    CHECK(r.cases >= 5);
    CHECK(r.passed);
  }
}

TEST_CASE("a sign flip in the conv backward is detected") {
  testing::set_fault(testing::Fault::ConvBackwardSignFlip);
  std::mt19937_64 rng(7);
  const double err = gc::max_relative_error(
      [](const auto& in) { return conv2d(in[0], in[1], in[2], 1, 1); },
      {random_tensor(rng, {1, 2, 5, 5}), random_tensor(rng, {3, 2, 3, 3}), random_tensor(rng, {1, 3, 1, 1})}, rng);
  testing::set_fault(testing::Fault::None);
  CHECK(err > 1e-1);
}

}  // TEST_SUITE
