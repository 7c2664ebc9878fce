#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "iidlab/losses.hpp"
#include "iidlab/signet.hpp"
#include "iidlab/synthgen.hpp"
#include "iidlab/train.hpp"

namespace iid::cfg {

struct Paths {
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "runs";
};

struct RunConfig {
  synth::SynthConfig synth;
  net::ModelConfig model;
  train::TrainConfig train;
  loss::LossWeights loss;
  Paths paths;
};

nlohmann::json to_json(const RunConfig& c);

/// Every section is optional; unknown sections or keys raise InvalidConfig.
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);

/// Applies "section.key=value" (dotted path, value parsed as JSON, falling back to a
/// string) to a JSON document.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace iid::cfg
