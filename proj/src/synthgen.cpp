#include "iidlab/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "iidlab/image_io.hpp"

namespace iid::synth {
namespace fs = std::filesystem;

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "synth: " + what); };
  if (size < 32) fail("size must be >= 32");
  if (n_regions < 2) fail("n_regions must be >= 2");
  if (!(shading_smoothness > 0.0f)) fail("shading_smoothness must be > 0");
  for (float p : {shadow_prob, wall_ceiling_prob}) {
    if (!(p >= 0.0f && p <= 1.0f)) fail("probabilities must lie in [0,1]");
  }
  if (!(shadow_attenuation > 0.0f && shadow_attenuation <= 1.0f)) {
    fail("shadow_attenuation must lie in (0,1]");
  }
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"size", c.size},
          {"n_regions", c.n_regions},
          {"shading_smoothness", c.shading_smoothness},
          {"shadow_prob", c.shadow_prob},
          {"shadow_attenuation", c.shadow_attenuation},
          {"wall_ceiling_prob", c.wall_ceiling_prob},
          {"seed", c.seed},
          {"flat_shading", c.flat_shading}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "synth: expected an object");
  SynthConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "size") c.size = v.get<int>();
      else if (key == "n_regions") c.n_regions = v.get<int>();
      else if (key == "shading_smoothness") c.shading_smoothness = v.get<float>();
      else if (key == "shadow_prob") c.shadow_prob = v.get<float>();
      else if (key == "shadow_attenuation") c.shadow_attenuation = v.get<float>();
      else if (key == "wall_ceiling_prob") c.wall_ceiling_prob = v.get<float>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "flat_shading") c.flat_shading = v.get<bool>();
      else throw Error(ErrorCode::InvalidConfig, "synth: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("synth: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

std::vector<float> blur_plane(const std::vector<float>& src, int n, float sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0f * sigma)));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  // Reflect-101 border so the field has no edge artefacts.
  auto reflect = [n](int i) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  std::vector<float> tmp(src.size()), out(src.size());
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * src[y * n + reflect(x + i)];
      tmp[y * n + x] = static_cast<float>(acc);
    }
  }
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[reflect(y + i) * n + x];
      out[y * n + x] = static_cast<float>(acc);
    }
  }
  return out;
}

float quantize(float v, float quantum) { return std::round(v / quantum) * quantum; }

}  // namespace

IntrinsicSample sample_scene(const SynthConfig& cfg, std::uint64_t index) {
  cfg.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = cfg.size;

  // Voronoi partition, ties to the lowest site index.
  std::vector<std::array<double, 2>> sites(cfg.n_regions);
  for (auto& s : sites) s = {unit(rng) * n, unit(rng) * n};
  std::vector<std::int64_t> raw(static_cast<size_t>(n) * n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double best = std::numeric_limits<double>::max();
      int arg = 0;
      for (int s = 0; s < cfg.n_regions; ++s) {
        const double dy = y + 0.5 - sites[s][0], dx = x + 0.5 - sites[s][1];
        const double d = dy * dy + dx * dx;
        if (d < best) {
          best = d;
          arg = s;
        }
      }
      raw[static_cast<size_t>(y) * n + x] = arg;
    }
  }

  // Colours in [0.1, 0.9] on the reflectance grid; classes per region.
  std::uniform_int_distribution<int> level(26, 230);
  std::vector<std::array<float, 3>> colors(cfg.n_regions);
  std::unordered_map<std::int64_t, SemanticClass> classes;
  for (int s = 0; s < cfg.n_regions; ++s) {
    for (float& c : colors[s]) c = static_cast<float>(level(rng)) * kReflectanceQuantum;
    const bool structural = unit(rng) < cfg.wall_ceiling_prob;
    const bool wall = unit(rng) < 0.5;
    classes[s] = structural ? (wall ? SemanticClass::Wall : SemanticClass::Ceiling)
                            : SemanticClass::Other;
  }

  IntrinsicSample out{ImageRGB(n, n), ImageRGB(n, n), GrayImage(n, n),
                      SegmentMap::from_raw(n, n, raw, classes)};

  std::vector<float> shading(static_cast<size_t>(n) * n, 1.0f);
  if (!cfg.flat_shading) {
    std::normal_distribution<float> gauss(0.0f, 1.0f);
    std::vector<float> noise(shading.size());
    for (float& v : noise) v = gauss(rng);
    shading = blur_plane(noise, n, cfg.shading_smoothness);
    const auto [lo, hi] = std::minmax_element(shading.begin(), shading.end());
    const float mn = *lo, mx = *hi;
    for (float& v : shading) v = mx > mn ? 0.2f + 0.8f * (v - mn) / (mx - mn) : 1.0f;

    if (unit(rng) < cfg.shadow_prob) {
      // Half-plane through a point in the central region; 2-pixel linear penumbra.
      const double theta = unit(rng) * 2.0 * std::numbers::pi;
      const double cy = (0.25 + 0.5 * unit(rng)) * n, cx = (0.25 + 0.5 * unit(rng)) * n;
      const double ny = std::sin(theta), nx = std::cos(theta);
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          const double d = (y + 0.5 - cy) * ny + (x + 0.5 - cx) * nx;
          const double t = std::clamp((d + 1.0) / 2.0, 0.0, 1.0);
          shading[static_cast<size_t>(y) * n + x] *=
              static_cast<float>(1.0 - t * (1.0 - cfg.shadow_attenuation));
        }
      }
    }
    for (float& v : shading) v = std::clamp(quantize(v, kShadingQuantum), kShadingQuantum, 1.0f);
  }

  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const float s = shading[static_cast<size_t>(y) * n + x];
      const auto& col = colors[raw[static_cast<size_t>(y) * n + x]];
      out.shading.at(y, x) = s;
      for (int c = 0; c < 3; ++c) {
        out.reflectance.at(y, x, c) = col[c];
        out.image.at(y, x, c) = std::clamp(col[c] * s, 0.0f, 1.0f);
      }
    }
  }
  return out;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw Error(ErrorCode::BadInput, "unknown split '" + std::string(name) + "'");
}

Split split_for_index(std::size_t index, std::size_t count) {
  const std::size_t n_train = count * 8 / 10;
  const std::size_t n_val = count / 10;
  if (index < n_train) return Split::Train;
  if (index < n_train + n_val) return Split::Val;
  return Split::Test;
}

std::vector<ManifestEntry> Manifest::select(Split split) const {
  std::vector<ManifestEntry> out;
  std::copy_if(samples.begin(), samples.end(), std::back_inserter(out),
               [split](const ManifestEntry& e) { return e.split == split; });
  return out;
}

fs::path generate_dataset(const SynthConfig& cfg, std::size_t count, const fs::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string());
  }
  nlohmann::ordered_json samples = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < count; ++i) {
    const IntrinsicSample s = sample_scene(cfg, i);
    char stem[32];
    std::snprintf(stem, sizeof stem, "sample_%05zu", i);
    const std::string base(stem);
    io::save_png(s.image, out_dir / (base + ".png"));
    io::save_pfm(s.reflectance, out_dir / (base + ".reflectance.pfm"));
    io::save_pfm(s.shading, out_dir / (base + ".shading.pfm"));
    io::save_segments(s.segments, out_dir / (base + ".segments.png"),
                      out_dir / (base + ".segments.json"));
    samples.push_back({{"image", base + ".png"},
                       {"reflectance", base + ".reflectance.pfm"},
                       {"shading", base + ".shading.pfm"},
                       {"segments", base + ".segments.png"},
                       {"split", std::string(to_string(split_for_index(i, count)))}});
  }
  nlohmann::ordered_json manifest;
  manifest["samples"] = std::move(samples);
  manifest["config"] = to_json(cfg);
  const fs::path path = out_dir / kManifestName;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
  return path;
}

Manifest load_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, "no such manifest: " + path.string());
  std::ifstream in(path);
  Manifest m;
  m.root = path.parent_path();
  try {
    const nlohmann::json doc = nlohmann::json::parse(in);
    for (const auto& s : doc.at("samples")) {
      m.samples.push_back({s.at("image").get<std::string>(), s.at("reflectance").get<std::string>(),
                           s.at("shading").get<std::string>(), s.at("segments").get<std::string>(),
                           parse_split(s.at("split").get<std::string>())});
    }
    m.config = doc.value("config", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadInput, path.string() + ": malformed manifest: " + e.what());
  }
  return m;
}

IntrinsicSample load_sample(const Manifest& manifest, const ManifestEntry& e) {
  IntrinsicSample s{io::load_png(manifest.resolve(e.image)),
                    io::load_pfm_rgb(manifest.resolve(e.reflectance)),
                    io::load_pfm_gray(manifest.resolve(e.shading)),
                    io::load_segments(manifest.resolve(e.segments))};
  check_consistent(s);
  return s;
}

}  // namespace iid::synth
