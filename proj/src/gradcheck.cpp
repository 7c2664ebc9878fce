#include "iidlab/gradcheck.hpp"

#include <chrono>
#include <cmath>

#include "iidlab/losses.hpp"
#include "iidlab/ops.hpp"
#include "iidlab/signet.hpp"
#include "iidlab/synthgen.hpp"
#include "iidlab/train.hpp"

namespace iid::gc {

using namespace iid::ad;

double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({1e-3, std::abs(a), std::abs(n)});
}

double max_relative_error(const Fn& f, std::vector<Tensor<double>> inputs, std::mt19937_64& rng, double h,
                          std::size_t max_coords) {
  for (auto& t : inputs) t = Tensor<double>::from(t.shape(), std::vector<double>(t.values().begin(), t.values().end()), true);
  const Tensor<double> probe = [&] {
    NoGradGuard guard;
    return f(inputs);
  }();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> weights(probe.numel());
  for (double& w : weights) w = normal(rng);
  const Tensor<double> proj = Tensor<double>::from(probe.shape(), weights);
  auto objective = [&] { return sum(mul(f(inputs), proj)); };

  const Tensor<double> loss = objective();
  loss.backward();

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) coords.emplace_back(k, i);
  }
  if (max_coords > 0 && coords.size() > max_coords) {
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }
  double worst = 0.0;
  NoGradGuard guard;
  for (const auto& [k, i] : coords) {
    auto values = inputs[k].mutable_values();
    const double orig = values[i];
    values[i] = orig + h;
    const double plus = objective().item();
    values[i] = orig - h;
    const double minus = objective().item();
    values[i] = orig;
    const auto g = inputs[k].grad();
    const double analytic = g.empty() ? 0.0 : g[i];
    worst = std::max(worst, relative_error(analytic, (plus - minus) / (2.0 * h)));
  }
  return worst;
}

namespace {

struct Gen {
  std::mt19937_64 rng;

  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

  Tensor<double> uniform(Shape s, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(s.numel());
    for (double& x : v) x = u(rng);
    return Tensor<double>::from(s, std::move(v));
  }

  /// Magnitudes in [0.1, 1] with random sign, clear of the kinks of relu and abs.
  Tensor<double> signed_away(Shape s) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::bernoulli_distribution coin(0.5);
    std::vector<double> v(s.numel());
    for (double& x : v) x = coin(rng) ? u(rng) : -u(rng);
    return Tensor<double>::from(s, std::move(v));
  }

  Shape shape(bool even = false) {
    Shape s{pick(1, 2), pick(1, 3), pick(3, 6), pick(3, 6)};
    if (even) {
      s.h = 2 * pick(2, 4);
      s.w = 2 * pick(2, 4);
    }
    return s;
  }
};

using CaseFn = std::function<double(Gen&)>;

CheckResult run_check(const std::string& name, int cases, double tol, Gen& gen, const CaseFn& one) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r{name, cases, 0.0, tol, false, 0.0};
  for (int i = 0; i < cases; ++i) r.max_error = std::max(r.max_error, one(gen));
  r.passed = r.max_error <= tol;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

double unary(Gen& g, Tensor<double> x, Tensor<double> (*op)(const Tensor<double>&)) {
  return max_relative_error([op](const auto& in) { return op(in[0]); }, {std::move(x)}, g.rng);
}

SegmentMap random_segments(Gen& g, int h, int w) {
  std::vector<std::int64_t> raw(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) raw[static_cast<std::size_t>(y) * w + x] = (y * 2 / h) * 2 + (x * 2 / w);
  }
  std::unordered_map<std::int64_t, SemanticClass> classes;
  for (std::int64_t k = 0; k < 4; ++k) {
    const int c = g.pick(0, 2);
    classes[k] = c == 0 ? SemanticClass::Other : c == 1 ? SemanticClass::Wall : SemanticClass::Ceiling;
  }
  classes[0] = SemanticClass::Wall;
  return SegmentMap::from_raw(h, w, raw, classes);
}

loss::SegmentBatch random_segment_batch(Gen& g, int n, int h, int w) {
  std::vector<SegmentMap> maps;
  for (int i = 0; i < n; ++i) maps.push_back(random_segments(g, h, w));
  std::vector<const SegmentMap*> ptrs;
  for (const auto& m : maps) ptrs.push_back(&m);
  return loss::SegmentBatch::from(ptrs);
}

double network_case(Gen& g, std::uint64_t seed) {
  synth::SynthConfig sc;
  sc.size = 32;
  sc.n_regions = 4;
  sc.wall_ceiling_prob = 1.0f;
  sc.seed = seed;
  net::ModelConfig mc;
  mc.base_width = 4;
  mc.input_size = 32;
  mc.seed = seed;
  std::vector<train::PreparedSample> data;
  for (int i = 0; i < 2; ++i) data.push_back(train::prepare_sample(synth::sample_scene(sc, i), mc.ablation, ""));
  std::vector<const net::InputTensors*> in;
  std::vector<const IntrinsicSample*> samples;
  std::vector<const priors::EdgePyramid*> edges;
  for (const auto& d : data) {
    in.push_back(&d.inputs);
    samples.push_back(&d.sample);
    edges.push_back(&d.edges);
  }
  const auto inputs = net::stack_inputs<double>(in);
  const auto targets = loss::make_targets<double>(samples, edges);
  net::SigNet<double> model(mc);
  auto params = model.params();

  const loss::LossWeights weights;
  auto objective = [&] {
    const auto out = model.forward(inputs, Mode::Train);
    return loss::compute_losses(out, targets, weights).total;
  };
  objective().backward();

  std::vector<std::pair<Param<double>*, std::size_t>> coords;
  for (int k = 0; k < 40; ++k) {
    Param<double>* p = params[g.pick(0, static_cast<int>(params.size()) - 1)];
    coords.emplace_back(p, static_cast<std::size_t>(g.pick(0, static_cast<int>(p->tensor.numel()) - 1)));
  }
  double worst = 0.0;
  // ReLU and |.| kinks sit close to many activations; a small step keeps the
  // central difference on one side of them.
  const double h = 1e-8;
  NoGradGuard guard;
  for (auto& [p, i] : coords) {
    auto v = p->tensor.mutable_values();
    const double orig = v[i];
    v[i] = orig + h;
    const double plus = objective().item();
    v[i] = orig - h;
    const double minus = objective().item();
    v[i] = orig;
    worst = std::max(worst, relative_error(p->tensor.grad()[i], (plus - minus) / (2 * h)));
  }
  return worst;
}

}  // namespace

std::vector<CheckResult> run_suite(const SuiteOptions& opt) {
  Gen g{std::mt19937_64(opt.seed)};
  const int n = opt.shapes;
  const double tol = opt.tolerance;
  std::vector<CheckResult> out;

  out.push_back(run_check("conv2d", n, tol, g, [](Gen& g) {
    const Shape s = g.shape();
    const int cout = g.pick(1, 3), k = g.pick(1, 3), stride = g.pick(1, 2), pad = g.pick(0, k / 2 + 0);
    return max_relative_error([&](const auto& in) { return conv2d(in[0], in[1], in[2], stride, pad); },
                              {g.uniform(s, -1, 1), g.uniform({cout, s.c, k, k}, -1, 1),
                               g.uniform({1, cout, 1, 1}, -1, 1)},
                              g.rng);
  }));
  out.push_back(run_check("deconv2d", n, tol, g, [](Gen& g) {
    const Shape s = g.shape();
    const int cout = g.pick(1, 3);
    const bool std_kernel = g.pick(0, 1) == 0;
    const int k = std_kernel ? 4 : 3, stride = std_kernel ? 2 : g.pick(1, 2), pad = std_kernel ? 1 : 0;
    return max_relative_error([&](const auto& in) { return deconv2d(in[0], in[1], in[2], stride, pad); },
                              {g.uniform(s, -1, 1), g.uniform({s.c, cout, k, k}, -1, 1),
                               g.uniform({1, cout, 1, 1}, -1, 1)},
                              g.rng);
  }));
  out.push_back(run_check("batchnorm2d", n, tol, g, [](Gen& g) {
    Shape s = g.shape();
    s.n = 2;
    const bool train = g.pick(0, 1) == 0;
    return max_relative_error(
        [&](const auto& in) {
          BatchNormState<double> state(s.c);
          for (int c = 0; c < s.c; ++c) {
            state.running_mean[c] = 0.1 * c;
            state.running_var[c] = 1.0 + 0.5 * c;
          }
          return batchnorm2d(in[0], in[1], in[2], state, train ? Mode::Train : Mode::Eval);
        },
        {g.uniform(s, -1, 1), g.uniform({1, s.c, 1, 1}, 0.5, 1.5), g.uniform({1, s.c, 1, 1}, -1, 1)}, g.rng);
  }));
  out.push_back(run_check("relu", n, tol, g, [](Gen& g) { return unary(g, g.signed_away(g.shape()), relu<double>); }));
  out.push_back(run_check("sigmoid", n, tol, g, [](Gen& g) { return unary(g, g.uniform(g.shape(), -4, 4), sigmoid<double>); }));
  out.push_back(run_check("abs", n, tol, g, [](Gen& g) { return unary(g, g.signed_away(g.shape()), ad::abs<double>); }));
  out.push_back(run_check("square", n, tol, g, [](Gen& g) { return unary(g, g.uniform(g.shape(), -2, 2), square<double>); }));
  out.push_back(run_check("clamp_min", n, tol, g, [](Gen& g) {
    return max_relative_error([](const auto& in) { return clamp_min(in[0], 0.0); }, {g.signed_away(g.shape())}, g.rng);
  }));
  out.push_back(run_check("scale/add_scalar", n, tol, g, [](Gen& g) {
    return max_relative_error([](const auto& in) { return add_scalar(scale(in[0], -1.7), 0.3); },
                              {g.uniform(g.shape(), -1, 1)}, g.rng);
  }));
  out.push_back(run_check("add", n, tol, g, [](Gen& g) {
    const Shape s = g.shape();
    return max_relative_error([](const auto& in) { return add(in[0], in[1]); },
                              {g.uniform(s, -1, 1), g.uniform(s, -1, 1)}, g.rng);
  }));
  out.push_back(run_check("sub", n, tol, g, [](Gen& g) {
    const Shape s = g.shape();
    return max_relative_error([](const auto& in) { return sub(in[0], in[1]); },
                              {g.uniform(s, -1, 1), g.uniform(s, -1, 1)}, g.rng);
  }));
  out.push_back(run_check("mul", n, tol, g, [](Gen& g) {
    const Shape s = g.shape();
    return max_relative_error([](const auto& in) { return mul(in[0], in[1]); },
                              {g.uniform(s, -1, 1), g.uniform(s, -1, 1)}, g.rng);
  }));
  out.push_back(run_check("div", n, tol, g, [](Gen& g) {
    const Shape s = g.shape();
    return max_relative_error([](const auto& in) { return div(in[0], in[1]); },
                              {g.uniform(s, -1, 1), g.uniform(s, 0.5, 1.5)}, g.rng);
  }));
  out.push_back(run_check("concat", n, tol, g, [](Gen& g) {
    const Shape s = g.shape();
    Shape s2 = s;
    s2.c = g.pick(1, 3);
    return max_relative_error([](const auto& in) { return concat<double>({in[0], in[1], in[0]}); },
                              {g.uniform(s, -1, 1), g.uniform(s2, -1, 1)}, g.rng);
  }));
  out.push_back(run_check("downsample2x", n, tol, g, [](Gen& g) {
    return unary(g, g.uniform(g.shape(true), -1, 1), downsample2x<double>);
  }));
  out.push_back(run_check("channel_sum/broadcast", n, tol, g, [](Gen& g) {
    return max_relative_error([](const auto& in) { return broadcast_channels(channel_sum(in[0]), 3); },
                              {g.uniform(g.shape(), -1, 1)}, g.rng);
  }));
  out.push_back(run_check("shift_diff", n, tol, g, [](Gen& g) {
    return max_relative_error(
        [](const auto& in) { return concat<double>({shift_diff(in[0], Axis::X), shift_diff(in[0], Axis::Y)}); },
        {g.uniform(g.shape(), -1, 1)}, g.rng);
  }));
  out.push_back(run_check("gaussian_blur", n, tol, g, [](Gen& g) {
    return max_relative_error([](const auto& in) { return gaussian_blur(in[0], 1.5, 5); },
                              {g.uniform(g.shape(), -1, 1)}, g.rng);
  }));
  out.push_back(run_check("sum/mean", n, tol, g, [](Gen& g) {
    return max_relative_error([](const auto& in) { return add(sum(in[0]), scale(mean(in[0]), 3.0)); },
                              {g.uniform(g.shape(), -1, 1)}, g.rng);
  }));
  out.push_back(run_check("mse", n, tol, g, [](Gen& g) {
    const Shape s = g.shape();
    return max_relative_error([](const auto& in) { return mse(in[0], in[1]); },
                              {g.uniform(s, -1, 1), g.uniform(s, -1, 1)}, g.rng);
  }));
  out.push_back(run_check("attention", n, tol, g, [](Gen& g) {
    const Shape s = g.shape();
    return max_relative_error([](const auto& in) { return net::attention(in[0], in[1]); },
                              {g.uniform(s, -3, 3), g.uniform(s, -1, 1)}, g.rng);
  }));
  out.push_back(run_check("dssim_loss", n, tol, g, [](Gen& g) {
    const Shape s = g.shape();
    return max_relative_error([](const auto& in) { return loss::dssim_loss(in[0], in[1]); },
                              {g.uniform(s, 0, 1), g.uniform(s, 0, 1)}, g.rng);
  }));
  out.push_back(run_check("final_loss", n, tol, g, [](Gen& g) {
    Shape s = g.shape(), s1 = s;
    s.c = 3;
    s1.c = 1;
    return max_relative_error([](const auto& in) { return loss::final_loss(in[0], in[1], in[2], in[3], in[4]); },
                              {g.uniform(s, 0, 1), g.uniform(s1, 0, 1), g.uniform(s, 0, 1), g.uniform(s1, 0, 1),
                               g.uniform(s, 0, 1)},
                              g.rng);
  }));
  out.push_back(run_check("norm_invariance_loss", n, tol, g, [](Gen& g) {
    Shape s = g.shape(true);
    s.c = 3;
    const auto seg = random_segment_batch(g, s.n, s.h, s.w);
    return max_relative_error(
        [&](const auto& in) { return loss::norm_invariance_loss(in[0], in[1], seg, 1e-4); },
        {g.uniform(s, 0.1, 1), g.uniform(s, 0.1, 1)}, g.rng);
  }));
  out.push_back(run_check("tv_loss", n, tol, g, [](Gen& g) {
    Shape s = g.shape(true);
    s.c = 3;
    const auto seg = random_segment_batch(g, s.n, s.h, s.w);
    return max_relative_error([&](const auto& in) { return loss::tv_loss(in[0], in[1], seg); },
                              {g.uniform(s, 0, 1), g.uniform(s, 0, 1)}, g.rng);
  }));
  if (opt.include_network) {
    out.push_back(run_check("total_loss (network)", 1, opt.network_tolerance, g,
                            [&](Gen& g) { return network_case(g, opt.seed); }));
  }
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

}  // namespace iid::gc
