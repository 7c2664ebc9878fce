#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "iidlab/priors.hpp"
#include "iidlab/synthgen.hpp"

using namespace iid;
using namespace iid::priors;

namespace {

SegmentMap one_segment(int h, int w) {
  return SegmentMap::from_raw(h, w, std::vector<std::int64_t>(static_cast<std::size_t>(h) * w, 0));
}

}  // namespace

TEST_SUITE("priors") {

TEST_CASE("cross colour ratios of a hand-computed pair") {
  ImageRGB img(1, 2);
  const float p1[3] = {0.5f, 0.25f, 0.1f}, p2[3] = {0.2f, 0.1f, 0.4f};
  for (int c = 0; c < 3; ++c) {
    img.at(0, 0, c) = p1[c];
    img.at(0, 1, c) = p2[c];
  }
  const CcrMaps m = ccr_maps(img);
  CHECK(m.right.rg.at(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(m.right.rb.at(0, 0) == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(m.right.gb.at(0, 0) == doctest::Approx(10.0).epsilon(1e-6));
  // Border pixels compare with themselves.
  CHECK(m.right.rg.at(0, 1) == 1.0f);
  CHECK(m.down.rb.at(0, 0) == 1.0f);
  CHECK(m.strength.at(0, 0) == doctest::Approx(2 * std::log(10.0)).epsilon(1e-5));
}

TEST_CASE("constant image has unit ratios and zero strength") {
  ImageRGB img(4, 5, 0.3f);
  const CcrMaps m = ccr_maps(img);
  for (const GrayImage* g : {&m.right.rg, &m.right.rb, &m.right.gb, &m.down.rg, &m.down.rb, &m.down.gb}) {
    for (float v : g->data()) CHECK(v == 1.0f);
  }
  for (float v : m.strength.data()) CHECK(v == 0.0f);
}

TEST_CASE("ratios are invariant to per-pixel channel-uniform scaling") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> scale(0.2f, 5.0f);
  for (int t = 0; t < 10; ++t) {
    const ImageRGB img = testutil::random_raster<3>(rng, 8, 8, 0.05f, 1.0f);
    ImageRGB lit = img;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        const float s = scale(rng);
        for (int c = 0; c < 3; ++c) lit.at(y, x, c) *= s;
      }
    }
    const CcrMaps a = ccr_maps(img), b = ccr_maps(lit);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.right.rg.data().size(); ++i) {
      for (auto [pa, pb] : {std::pair{&a.right.rg, &b.right.rg}, {&a.right.rb, &b.right.rb}, {&a.right.gb, &b.right.gb},
                            {&a.down.rg, &b.down.rg}, {&a.down.rb, &b.down.rb}, {&a.down.gb, &b.down.gb}}) {
        worst = std::max(worst, std::abs(static_cast<double>(pa->data()[i]) - pb->data()[i]) / pa->data()[i]);
      }
    }
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("mean reflectance estimate") {
  ImageRGB img(1, 2);
  const float a[3] = {0.2f, 0.4f, 0.6f}, b[3] = {0.4f, 0.2f, 0.2f};
  for (int c = 0; c < 3; ++c) {
    img.at(0, 0, c) = a[c];
    img.at(0, 1, c) = b[c];
  }
  const ImageRGB r = mean_reflectance_estimate(img, one_segment(1, 2));
  for (int x = 0; x < 2; ++x) {
    CHECK(r.at(0, x, 0) == doctest::Approx(0.3));
    CHECK(r.at(0, x, 1) == doctest::Approx(0.3));
    CHECK(r.at(0, x, 2) == doctest::Approx(0.4));
  }

  std::mt19937_64 rng(2);
  const ImageRGB rnd = testutil::random_raster<3>(rng, 3, 3);
  std::vector<std::int64_t> ids(9);
  for (int i = 0; i < 9; ++i) ids[i] = i;
  CHECK(mean_reflectance_estimate(rnd, SegmentMap::from_raw(3, 3, ids)) == rnd);

  const ImageRGB flat(3, 4, 0.7f);
  CHECK(mean_reflectance_estimate(flat, one_segment(3, 4)) == flat);
}

TEST_CASE("mean reflectance estimate is idempotent") {
  const IntrinsicSample s = synth::sample_scene(synth::SynthConfig{}, 2);
  const ImageRGB once = mean_reflectance_estimate(s.image, s.segments);
  CHECK(mean_reflectance_estimate(once, s.segments) == once);
}

TEST_CASE("inverse shading estimate") {
  ImageRGB img(1, 1, 0.25f), r(1, 1, 0.5f);
  CHECK(inverse_shading_estimate(img, r).at(0, 0) == doctest::Approx(0.5));
  CHECK(inverse_shading_estimate(r, r).at(0, 0) == 1.0f);
  ImageRGB dark(1, 1, 0.0f);
  CHECK(inverse_shading_estimate(ImageRGB(1, 1, 1.0f), dark).at(0, 0) == kMaxShadingEstimate);
}

TEST_CASE("priors reconstruct synthetic images") {
  for (std::uint64_t i = 0; i < 10; ++i) {
    const IntrinsicSample s = synth::sample_scene(synth::SynthConfig{}, i);
    const PriorBundle b = compute_bundle(s.image, s.segments);
    double worst = 0.0;
    for (int y = 0; y < s.image.height(); ++y) {
      for (int x = 0; x < s.image.width(); ++x) {
        for (int c = 0; c < 3; ++c) {
          worst = std::max(worst, std::abs(static_cast<double>(b.r_est.at(y, x, c)) * b.s_est.at(y, x) -
                                           s.image.at(y, x, c)));
        }
      }
    }
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("normalized rgb") {
  ImageRGB img(1, 3);
  const float px[3][3] = {{0.2f, 0.2f, 0.2f}, {0.6f, 0.3f, 0.1f}, {1.2f, 0.6f, 0.2f}};
  for (int x = 0; x < 3; ++x) {
    for (int c = 0; c < 3; ++c) img.at(0, x, c) = px[x][c];
  }
  const ImageRGB n = normalized_rgb(img);
  for (int c = 0; c < 3; ++c) CHECK(n.at(0, 0, c) == doctest::Approx(1.0 / 3.0));
  for (int c = 0; c < 3; ++c) CHECK(n.at(0, 1, c) == doctest::Approx(px[1][c]).epsilon(1e-6));
  for (int c = 0; c < 3; ++c) CHECK(n.at(0, 2, c) == doctest::Approx(n.at(0, 1, c)).epsilon(1e-6));
  CHECK(normalized_rgb(ImageRGB(1, 1, 0.0f)).at(0, 0, 0) == 0.0f);
}

TEST_CASE("canny on constant reflectance is empty") {
  const EdgePyramid p = canny_edge_pyramid(ImageRGB(32, 32, 0.4f));
  for (const GrayImage* g : {&p.full, &p.half, &p.quarter}) {
    for (float v : g->data()) CHECK(v == 0.0f);
  }
}

TEST_CASE("canny pyramid shape and binary values") {
  const IntrinsicSample s = synth::sample_scene(synth::SynthConfig{}, 5);
  const EdgePyramid p = canny_edge_pyramid(s.reflectance);
  CHECK(p.full.height() == 64);
  CHECK(p.half.height() == 32);
  CHECK(p.half.width() == 32);
  CHECK(p.quarter.height() == 16);
  CHECK(p.quarter.width() == 16);
  int edges = 0;
  for (const GrayImage* g : {&p.full, &p.half, &p.quarter}) {
    for (float v : g->data()) {
      CHECK((v == 0.0f || v == 1.0f));
      edges += v == 1.0f;
    }
  }
  CHECK(edges > 0);
}

TEST_CASE("canny localises a vertical step") {
  for (int k : {8, 13, 20}) {
    ImageRGB img(24, 32, 0.2f);
    for (int y = 0; y < 24; ++y) {
      for (int x = k; x < 32; ++x) {
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = 0.8f;
      }
    }
    // Oracle: the gradient magnitude of a step peaks between columns k-1 and k.
    const GrayImage e = canny_edge_pyramid(img).full;
    int hits = 0;
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 32; ++x) {
        if (e.at(y, x) == 1.0f) {
          CHECK(std::abs(x - k) <= 1);
          ++hits;
        }
      }
    }
    CHECK(hits >= 24);
  }
}

TEST_CASE("canny rejects tiny images") {
  try {
    canny_edge_pyramid(ImageRGB(15, 40));
    FAIL("expected DegenerateImage");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateImage);
  }
}

TEST_CASE("bundle invariants") {
  const IntrinsicSample s = synth::sample_scene(synth::SynthConfig{}, 9);
  const PriorBundle b = compute_bundle(s.image, s.segments);
  for (float v : b.s_est.data()) CHECK(v >= 0.0f);
  for (float v : b.ccr.strength.data()) CHECK(v >= 0.0f);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      CHECK(b.nrgb.at(y, x, 0) + b.nrgb.at(y, x, 1) + b.nrgb.at(y, x, 2) == doctest::Approx(1.0).epsilon(1e-5));
    }
  }
}

}  // TEST_SUITE
