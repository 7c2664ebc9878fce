#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "iidlab/losses.hpp"
#include "iidlab/signet.hpp"
#include "iidlab/synthgen.hpp"

namespace iid::train {

struct TrainConfig {
  int epochs = 60;
  double lr = 2e-4;
  int batch = 4;
  /// Stops after this many optimiser steps when > 0.
  std::int64_t max_iters = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// A sample with its network inputs and ground-truth edge pyramid computed once.
struct PreparedSample {
  std::string name;
  IntrinsicSample sample;
  priors::EdgePyramid edges;
  net::InputTensors inputs;
};

PreparedSample prepare_sample(IntrinsicSample sample, const net::Ablation& ablation, std::string name);

/// ManifestEmpty if the split has no samples.
std::vector<PreparedSample> prepare_split(const synth::Manifest& manifest, synth::Split split,
                                          const net::Ablation& ablation);

struct TrainOptions {
  TrainConfig train;
  loss::LossWeights weights;
  /// Loss log, per-epoch checkpoints and the architecture report go here; empty disables files.
  std::filesystem::path out_dir;
  /// Stored in checkpoint headers.
  nlohmann::json run_config = nlohmann::json::object();
  /// Called after every step with the 1-based iteration.
  std::function<void(std::int64_t, const loss::LossReport&)> on_step;
};

struct TrainResult {
  std::vector<loss::LossReport> losses;
  std::int64_t iterations = 0;
  std::filesystem::path checkpoint;
};

inline constexpr const char* kLossLogName = "loss_log.jsonl";
inline constexpr const char* kCheckpointName = "checkpoint.ckpt";
inline constexpr const char* kArchitectureName = "architecture.json";

/// One JSON-lines record {iter, L_e, L_i, L_f, L_Norm, L_TV, L_dssim, total}.
std::string loss_log_line(std::int64_t iter, const loss::LossReport& r);

/// Adam on total_loss over shuffled mini-batches; the order is fixed by the model seed
/// and the epoch. ManifestEmpty on no data; NonFiniteLoss names the failing iteration.
TrainResult train_loop(net::SigNet<float>& net, std::span<const PreparedSample> data, const TrainOptions& opt);

}  // namespace iid::train
