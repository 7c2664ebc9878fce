#include <fstream>
#include <map>

#include "doctest.h"
#include "helpers.hpp"
#include "iidlab/synthgen.hpp"

using namespace iid;
using namespace iid::synth;
using testutil::TempDir;

TEST_SUITE("synthgen") {

TEST_CASE("image is exactly reflectance times shading") {
  SynthConfig cfg;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const IntrinsicSample s = sample_scene(cfg, i);
    for (int y = 0; y < cfg.size; ++y) {
      for (int x = 0; x < cfg.size; ++x) {
        for (int c = 0; c < 3; ++c) REQUIRE(s.image.at(y, x, c) == s.reflectance.at(y, x, c) * s.shading.at(y, x));
      }
    }
  }
}

TEST_CASE("flat shading reproduces the reflectance") {
  SynthConfig cfg;
  cfg.flat_shading = true;
  cfg.shadow_prob = 0.0f;
  const IntrinsicSample s = sample_scene(cfg, 1);
  CHECK(s.image == s.reflectance);
  for (float v : s.shading.data()) CHECK(v == 1.0f);
}

TEST_CASE("samples are deterministic in seed and index") {
  SynthConfig cfg;
  cfg.seed = 42;
  const IntrinsicSample a = sample_scene(cfg, 3), b = sample_scene(cfg, 3);
  CHECK(a.image == b.image);
  CHECK(a.segments == b.segments);
  CHECK_FALSE(sample_scene(cfg, 4).image == a.image);
}

TEST_CASE("segments partition constant reflectance and value ranges hold") {
  SynthConfig cfg;
  cfg.wall_ceiling_prob = 0.5f;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const IntrinsicSample s = sample_scene(cfg, i);
    std::map<int, std::array<float, 3>> colour;
    for (int y = 0; y < cfg.size; ++y) {
      for (int x = 0; x < cfg.size; ++x) {
        const std::array<float, 3> c{s.reflectance.at(y, x, 0), s.reflectance.at(y, x, 1), s.reflectance.at(y, x, 2)};
        const auto [it, fresh] = colour.emplace(s.segments.label(y, x), c);
        REQUIRE(it->second == c);
        for (float v : c) REQUIRE((v >= 0.1f && v <= 0.9f));
        REQUIRE(s.shading.at(y, x) > 0.0f);
        REQUIRE(s.shading.at(y, x) <= 1.0f);
      }
    }
    CHECK(s.segments.segment_count() <= cfg.n_regions);
  }
}

TEST_CASE("split assignment is floor 80/10/10") {
  int counts[3] = {0, 0, 0};
  for (std::size_t i = 0; i < 10; ++i) ++counts[static_cast<int>(split_for_index(i, 10))];
  CHECK(counts[0] == 8);
  CHECK(counts[1] == 1);
  CHECK(counts[2] == 1);
}

TEST_CASE("dataset generation writes a manifest and is byte-reproducible") {
  TempDir a, b;
  SynthConfig cfg;
  cfg.size = 32;
  const auto ma = generate_dataset(cfg, 10, a.path());
  const auto mb = generate_dataset(cfg, 10, b.path());
  const Manifest m = load_manifest(ma);
  CHECK(m.samples.size() == 10);
  CHECK(m.select(Split::Train).size() == 8);
  CHECK(m.select(Split::Val).size() == 1);
  CHECK(m.select(Split::Test).size() == 1);
  for (const auto& entry : std::filesystem::directory_iterator(a.path())) {
    const auto name = entry.path().filename();
    CHECK(testutil::read_bytes(entry.path()) == testutil::read_bytes(b.path() / name));
  }
  CHECK(testutil::read_bytes(ma) == testutil::read_bytes(mb));
  const IntrinsicSample s = load_sample(m, m.samples[3]);
  CHECK(s.reflectance == sample_scene(cfg, 3).reflectance);
}

TEST_CASE("empty dataset") {
  TempDir d;
  const Manifest m = load_manifest(generate_dataset(SynthConfig{}, 0, d / "empty"));
  CHECK(m.samples.empty());
}

TEST_CASE("config validation") {
  SynthConfig cfg;
  cfg.size = 16;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_THROWS_AS(synth_config_from_json(nlohmann::json{{"sise", 64}}), Error);
  const SynthConfig back = synth_config_from_json(to_json(SynthConfig{}));
  CHECK(back.n_regions == 8);
  CHECK(back.shadow_attenuation == doctest::Approx(0.4));
}

}  // TEST_SUITE
