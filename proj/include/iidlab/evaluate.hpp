#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "iidlab/metrics.hpp"
#include "iidlab/signet.hpp"
#include "iidlab/synthgen.hpp"
#include "iidlab/train.hpp"

namespace iid::eval {

struct Decomposition {
  ImageRGB r_initial, r_final;
  GrayImage s_initial, s_final;
  GrayImage edge_full;
};

/// Eval-mode forward of a single input, converted back to rasters.
Decomposition predict(net::SigNet<float>& net, const net::InputTensors& inputs);

struct EvalOptions {
  /// Score the ground truth against itself instead of running the network.
  bool gt_bypass = false;
};

struct ImageResult {
  std::string name;
  metrics::MetricReport metrics;
};

struct EvalReport {
  std::string split;
  std::string arch_hash;
  bool gt_bypass = false;
  std::vector<ImageResult> images;
  metrics::MetricReport aggregate;

  nlohmann::ordered_json to_json() const;
};

/// Scores final outputs over the samples; EmptySplit when there are none.
EvalReport evaluate(net::SigNet<float>& net, std::span<const train::PreparedSample> samples,
                    const EvalOptions& opt = {});

/// Loads the checkpoint and scores one manifest split. When `expected` is given, its
/// architecture must match the checkpoint's (CheckpointMismatch otherwise).
EvalReport evaluate(const synth::Manifest& manifest, synth::Split split,
                    const std::filesystem::path& checkpoint, const EvalOptions& opt = {},
                    const net::ModelConfig* expected = nullptr);

}  // namespace iid::eval
