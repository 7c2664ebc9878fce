#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "iidlab/tensor.hpp"

namespace iid::gc {

using ad::Tensor;
using Fn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

/// |a - n| / max(1e-3, |a|, |n|).
double relative_error(double analytic, double numeric);

/// Largest relative error between reverse-mode and central-difference gradients of
/// sum(f(inputs) * R) for a fixed random R. When max_coords > 0 only that many
/// randomly chosen input coordinates are probed.
double max_relative_error(const Fn& f, std::vector<Tensor<double>> inputs, std::mt19937_64& rng,
                          double h = 1e-5, std::size_t max_coords = 0);

struct CheckResult {
  std::string name;
  int cases = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  double seconds = 0.0;
};

struct SuiteOptions {
  std::uint64_t seed = 0;
  int shapes = 5;
  double tolerance = 1e-4;
  /// Through total_loss on a small network.
  double network_tolerance = 1e-3;
  bool include_network = true;
};

/// Operation checks (conv2d, deconv2d, batchnorm2d, activations, arithmetic, layout,
/// reductions, attention, losses) followed by the end-to-end network check.
std::vector<CheckResult> run_suite(const SuiteOptions& opt = {});

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace iid::gc
