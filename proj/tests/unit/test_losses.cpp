#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "iidlab/losses.hpp"
#include "iidlab/synthgen.hpp"
#include "iidlab/train.hpp"

using namespace iid;
using namespace iid::loss;
using ad::Shape;
using ad::Tensor;
using testutil::random_tensor;

namespace {

SegmentBatch one_segment(int h, int w, SemanticClass cls) {
  static std::vector<SegmentMap> keep;
  keep.emplace_back(h, w, std::vector<std::int32_t>(h * w, 0), std::vector<SemanticClass>{cls});
  const SegmentMap* maps[] = {&keep.back()};
  return SegmentBatch::from(maps);
}

struct GroundTruth {
  std::vector<train::PreparedSample> data;
  Targets<float> targets;
  net::ForwardOutputs<float> perfect;
};

GroundTruth ground_truth(int count, int size) {
  GroundTruth g;
  synth::SynthConfig cfg;
  cfg.size = size;
  cfg.seed = 5;
  cfg.wall_ceiling_prob = 0.6f;
  for (int i = 0; i < count; ++i) {
    g.data.push_back(train::prepare_sample(synth::sample_scene(cfg, i), {}, ""));
  }
  std::vector<const IntrinsicSample*> ss;
  std::vector<const priors::EdgePyramid*> es;
  for (const auto& d : g.data) {
    ss.push_back(&d.sample);
    es.push_back(&d.edges);
  }
  g.targets = make_targets<float>(ss, es);
  const auto& t = g.targets;
  g.perfect = {t.edge_full, t.edge_half, t.edge_quarter, t.reflectance, t.shading, t.reflectance, t.shading};
  return g;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("weights and totals") {
  LossWeights w;
  CHECK(w.lambda_e == 0.4);
  CHECK(w.lambda_i == 0.5);
  CHECK(w.lambda_p == 0.05);
  CHECK(w.lambda_dssim == 0.4);
  LossReport r;
  r.l_e = r.l_i = r.l_f = 1.0;
  CHECK(total_loss(r, w).total == doctest::Approx(1.9).epsilon(1e-12));
  CHECK(total_loss(LossReport{}, w).total == 0.0);
  LossReport a;
  a.l_dssim = 0.3;
  LossReport b = a;
  b.l_dssim = 0.6;
  CHECK(total_loss(b, w).total - total_loss(a, w).total == doctest::Approx(0.4 * 0.3));
  w.lambda_e = -1;
  CHECK_THROWS_AS(w.validate(), Error);
  CHECK_THROWS_AS(loss_weights_from_json({{"lambda_q", 1}}), Error);
}

TEST_CASE("edge loss") {
  std::mt19937_64 rng(1);
  net::ForwardOutputs<double> out;
  Targets<double> gt;
  gt.edge_full = random_tensor(rng, {2, 1, 16, 16}, 0, 1);
  gt.edge_half = random_tensor(rng, {2, 1, 8, 8}, 0, 1);
  gt.edge_quarter = random_tensor(rng, {2, 1, 4, 4}, 0, 1);
  out.edge_full = gt.edge_full;
  out.edge_half = gt.edge_half;
  out.edge_quarter = gt.edge_quarter;
  CHECK(edge_loss(out, gt).item() == 0.0);
  out.edge_half = ad::add_scalar(gt.edge_half, 1.0);
  const double half_off = edge_loss(out, gt).item();
  CHECK(half_off == doctest::Approx(1.0).epsilon(1e-12));
  out.edge_half = gt.edge_half;
  out.edge_quarter = ad::add_scalar(gt.edge_quarter, 1.0);
  CHECK(edge_loss(out, gt).item() == doctest::Approx(half_off).epsilon(1e-12));
  out.edge_full = random_tensor(rng, {2, 1, 8, 8});
  CHECK_THROWS_AS(edge_loss(out, gt), Error);
}

TEST_CASE("initial loss") {
  std::mt19937_64 rng(2);
  const auto r = random_tensor(rng, {1, 3, 8, 8}, 0, 1);
  const auto s = random_tensor(rng, {1, 1, 8, 8}, 0, 2);
  CHECK(initial_loss(r, s, r, s).item() == 0.0);
  CHECK(initial_loss(ad::add_scalar(r, 1.0), s, r, s).item() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(initial_loss(r, ad::add_scalar(s, 1.0), r, s).item() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("final loss") {
  const auto g = ground_truth(3, 32);
  const auto& t = g.targets;
  CHECK(final_loss(t.reflectance, t.shading, t.reflectance, t.shading, t.image).item() == 0.0f);

  std::mt19937_64 rng(3);
  const auto r = random_tensor(rng, {2, 3, 6, 6}, 0.1, 0.9);
  const auto s = random_tensor(rng, {2, 1, 6, 6}, 0.2, 1.5);
  const auto img = ad::mul(r, ad::broadcast_channels(s, 3));
  double expect = 0.0;
  for (double v : img.values()) expect += v * v;
  expect /= static_cast<double>(img.numel());
  CHECK(final_loss(r, s, r, s, Tensor<double>::zeros(img.shape())).item() == doctest::Approx(expect).epsilon(1e-12));

  const auto r2 = ad::scale(r, 2.0);
  const auto s2 = ad::scale(s, 0.5);
  const double base = final_loss(r, s, r, s, img).item();
  const double probe = final_loss(r2, s2, r, s, img).item();
  const double lr = ad::mse(r2, r).item() + ad::mse(s2, s).item();
  CHECK(base <= 1e-12);
  CHECK(probe == doctest::Approx(lr).epsilon(1e-9));
  CHECK(probe > 0.0);
}

TEST_CASE("norm invariance loss") {
  std::mt19937_64 rng(4);
  const auto img = random_tensor(rng, {1, 3, 6, 6}, 0.05, 1.0);
  const auto seg = one_segment(6, 6, SemanticClass::Other);
  CHECK(norm_invariance_loss(img, img, seg).item() == 0.0);
  CHECK(norm_invariance_loss(ad::scale(img, 0.5), img, seg).item() <= 1e-15);

  // gray prediction against a coloured 2-pixel segment
  const auto colour = Tensor<double>::from({1, 3, 1, 2}, {0.6, 0.6, 0.3, 0.3, 0.1, 0.1});
  const auto gray = Tensor<double>::full({1, 3, 1, 2}, 0.5);
  const double third = 1.0 / 3.0;
  const double expect = (std::pow(third - 0.6, 2) + std::pow(third - 0.3, 2) + std::pow(third - 0.1, 2)) / 3.0;
  CHECK(norm_invariance_loss(gray, colour, one_segment(1, 2, SemanticClass::Other)).item() ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("norm invariance loss ignores per-segment rescaling") {
  const auto g = ground_truth(2, 32);
  std::mt19937_64 rng(5);
  const Shape s = g.targets.reflectance.shape();
  const auto pred = random_tensor(rng, {s.n, s.c, s.h, s.w}, 0.05, 1.0);
  const double base = norm_invariance_loss(pred, Tensor<double>::from(s, {g.targets.image.values().begin(),
                                                                         g.targets.image.values().end()}),
                                           g.targets.segments)
                          .item();
  std::vector<double> scaled(pred.values().begin(), pred.values().end());
  const auto& seg = g.targets.segments;
  for (int n = 0; n < s.n; ++n) {
    std::vector<double> factor(seg.segment_counts[n]);
    for (double& f : factor) f = std::uniform_real_distribution<double>(0.2, 5.0)(rng);
    for (int c = 0; c < s.c; ++c) {
      for (std::size_t i = 0; i < s.plane(); ++i) {
        scaled[(static_cast<std::size_t>(n) * s.c + c) * s.plane() + i] *= factor[seg.labels[n * s.plane() + i]];
      }
    }
  }
  const double after = norm_invariance_loss(Tensor<double>::from(s, scaled),
                                            Tensor<double>::from(s, {g.targets.image.values().begin(),
                                                                     g.targets.image.values().end()}),
                                            seg)
                           .item();
  CHECK(base > 0.0);
  CHECK(std::abs(after - base) <= 1e-6);
}

TEST_CASE("tv loss") {
  std::mt19937_64 rng(6);
  const auto flat = Tensor<double>::full({1, 3, 4, 4}, 0.3);
  CHECK(tv_loss(flat, Tensor<double>::full({1, 3, 4, 4}, 0.7), one_segment(4, 4, SemanticClass::Wall)).item() == 0.0);
  const auto noisy = random_tensor(rng, {1, 3, 4, 4}, 0, 1);
  CHECK(tv_loss(noisy, flat, one_segment(4, 4, SemanticClass::Other)).item() == 0.0);
  CHECK(tv_loss(noisy, flat, one_segment(4, 4, SemanticClass::Ceiling)).item() > 0.0);

  // 1x2 wall: TV(pred) = [1, 0] per channel, TV(gt) = 0, mean of squares over 2 pixels
  const auto step = Tensor<double>::from({1, 3, 1, 2}, {0.2, 1.2, 0.2, 1.2, 0.2, 1.2});
  CHECK(tv_loss(step, Tensor<double>::full({1, 3, 1, 2}, 0.4), one_segment(1, 2, SemanticClass::Wall)).item() ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("tv pairs stay inside one wall segment") {
  std::vector<SegmentMap> maps;
  maps.emplace_back(1, 2, std::vector<std::int32_t>{0, 1}, std::vector<SemanticClass>{SemanticClass::Wall, SemanticClass::Wall});
  const SegmentMap* ptr[] = {&maps[0]};
  const auto seg = SegmentBatch::from(ptr);
  const auto step = Tensor<double>::from({1, 3, 1, 2}, {0.2, 1.2, 0.2, 1.2, 0.2, 1.2});
  CHECK(tv_loss(step, Tensor<double>::full({1, 3, 1, 2}, 0.4), seg).item() == 0.0);
}

TEST_CASE("ssim and dssim") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 5; ++t) {
    const auto x = random_tensor(rng, {2, 3, 12, 12}, 0, 1);
    const auto y = random_tensor(rng, {2, 3, 12, 12}, 0, 1);
    CHECK(std::abs(dssim_loss(x, x).item()) <= 1e-12);
    CHECK(std::abs(dssim_loss(x, y).item() - dssim_loss(y, x).item()) <= 1e-9);
    CHECK(dssim_loss(x, y).item() > 0.0);
    CHECK(ssim(x, x).item() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("every term is exactly zero at ground truth") {
  const auto g = ground_truth(6, 32);
  bool saw_wall = false;
  for (auto h : g.targets.segments.homogeneous) saw_wall |= h != 0;
  CHECK(saw_wall);
  const auto terms = compute_losses(g.perfect, g.targets, {});
  const auto r = terms.report();
  CHECK(r.l_e == 0.0);
  CHECK(r.l_i == 0.0);
  CHECK(r.l_f == 0.0);
  CHECK(r.l_norm == 0.0);
  CHECK(r.l_tv == 0.0);
  CHECK(r.l_dssim == 0.0);
  CHECK(r.total == 0.0);
}

TEST_CASE("losses are non-negative on random predictions") {
  const auto g = ground_truth(2, 32);
  std::mt19937_64 rng(8);
  auto rnd = [&](const Tensor<float>& like, float lo, float hi) {
    std::uniform_real_distribution<float> u(lo, hi);
    std::vector<float> v(like.numel());
    for (float& x : v) x = u(rng);
    return Tensor<float>::from(like.shape(), v);
  };
  const auto& t = g.targets;
  for (int k = 0; k < 5; ++k) {
    net::ForwardOutputs<float> out{rnd(t.edge_full, 0, 1),    rnd(t.edge_half, 0, 1), rnd(t.edge_quarter, 0, 1),
                                   rnd(t.reflectance, 0, 1), rnd(t.shading, 0, 2),   rnd(t.reflectance, 0, 1),
                                   rnd(t.shading, 0, 2)};
    const auto r = compute_losses(out, t, {}).report();
    for (double v : {r.l_e, r.l_i, r.l_f, r.l_norm, r.l_tv, r.l_dssim}) CHECK(v >= 0.0);
    CHECK(r.total == doctest::Approx(total_loss(r, {}).total).epsilon(1e-5));
    CHECK(compute_losses(out, t, {}, false).report().l_e == 0.0);
  }
}

}  // TEST_SUITE
