#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "iidlab/image.hpp"

namespace iid::synth {

struct SynthConfig {
  int size = 64;
  int n_regions = 8;
  /// Gaussian sigma, in pixels, of the smooth shading field.
  float shading_smoothness = 12.0f;
  float shadow_prob = 0.5f;
  float shadow_attenuation = 0.4f;
  float wall_ceiling_prob = 0.3f;
  std::uint64_t seed = 0;
  /// Limit of infinite smoothness with no shadow: shading is identically 1.
  bool flat_shading = false;

  /// Throws InvalidConfig.
  void validate() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
/// Unknown keys are rejected with InvalidConfig.
SynthConfig synth_config_from_json(const nlohmann::json& j);

/// Reflectance channels lie on a 1/256 grid and shading on a 1/4096 grid, so
/// image = reflectance * shading is exact in float and so are per-pixel channel sums.
inline constexpr float kReflectanceQuantum = 1.0f / 256.0f;
inline constexpr float kShadingQuantum = 1.0f / 4096.0f;

/// Deterministic in (cfg.seed, index).
IntrinsicSample sample_scene(const SynthConfig& cfg, std::uint64_t index);

enum class Split { Train, Val, Test };
std::string_view to_string(Split split);
Split parse_split(std::string_view name);

/// Floor-based 80/10/10 assignment by index.
Split split_for_index(std::size_t index, std::size_t count);

struct ManifestEntry {
  std::filesystem::path image;
  std::filesystem::path reflectance;
  std::filesystem::path shading;
  std::filesystem::path segments;
  Split split = Split::Train;
};

struct Manifest {
  std::filesystem::path root;  // directory paths are relative to
  std::vector<ManifestEntry> samples;
  nlohmann::json config;

  std::vector<ManifestEntry> select(Split split) const;
  std::filesystem::path resolve(const std::filesystem::path& p) const { return root / p; }
};

inline constexpr const char* kManifestName = "manifest.json";

/// Writes sample_NNNNN.{png, reflectance.pfm, shading.pfm, segments.png, segments.json}
/// and manifest.json into out_dir. Returns the manifest path.
std::filesystem::path generate_dataset(const SynthConfig& cfg, std::size_t count,
                                       const std::filesystem::path& out_dir);

Manifest load_manifest(const std::filesystem::path& path);

/// Reads one entry back: image from PNG, ground truth from PFM.
IntrinsicSample load_sample(const Manifest& manifest, const ManifestEntry& entry);

}  // namespace iid::synth
