#include "iidlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "iidlab/checkpoint.hpp"
#include "iidlab/ops.hpp"

namespace iid::train {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "train: epochs must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::InvalidConfig, "train: lr must be >= 0");
  if (batch < 1) throw Error(ErrorCode::InvalidConfig, "train: batch must be >= 1");
  if (max_iters < 0) throw Error(ErrorCode::InvalidConfig, "train: max_iters must be >= 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs}, {"lr", c.lr}, {"batch", c.batch}, {"max_iters", c.max_iters}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "train: expected an object");
  TrainConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "batch") c.batch = v.get<int>();
      else if (key == "max_iters") c.max_iters = v.get<std::int64_t>();
      else throw Error(ErrorCode::InvalidConfig, "train: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("train: ") + e.what());
  }
  c.validate();
  return c;
}

PreparedSample prepare_sample(IntrinsicSample sample, const net::Ablation& ablation, std::string name) {
  check_consistent(sample);
  PreparedSample p;
  p.name = std::move(name);
  const priors::PriorBundle bundle = priors::compute_bundle(sample.image, sample.segments);
  p.inputs = net::make_inputs(sample.image, sample.segments, bundle, ablation);
  p.edges = priors::canny_edge_pyramid(sample.reflectance);
  p.sample = std::move(sample);
  return p;
}

std::vector<PreparedSample> prepare_split(const synth::Manifest& manifest, synth::Split split,
                                          const net::Ablation& ablation) {
  const auto entries = manifest.select(split);
  if (entries.empty()) {
    throw Error(ErrorCode::ManifestEmpty,
                "manifest has no samples in split '" + std::string(synth::to_string(split)) + "'");
  }
  std::vector<PreparedSample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    out.push_back(prepare_sample(synth::load_sample(manifest, e), ablation, e.image.stem().string()));
  }
  return out;
}

std::string loss_log_line(std::int64_t iter, const loss::LossReport& r) {
  nlohmann::ordered_json j{{"iter", iter},         {"L_e", r.l_e},     {"L_i", r.l_i},
                           {"L_f", r.l_f},         {"L_Norm", r.l_norm}, {"L_TV", r.l_tv},
                           {"L_dssim", r.l_dssim}, {"total", r.total}};
  return j.dump();
}

TrainResult train_loop(net::SigNet<float>& net, std::span<const PreparedSample> data, const TrainOptions& opt) {
  opt.train.validate();
  opt.weights.validate();
  if (data.empty()) throw Error(ErrorCode::ManifestEmpty, "train_loop: no training samples");

  std::ofstream log;
  if (!opt.out_dir.empty()) {
    fs::create_directories(opt.out_dir);
    std::ofstream(opt.out_dir / kArchitectureName) << net.architecture_report().dump(2) << '\n';
    log.open(opt.out_dir / kLossLogName, std::ios::trunc);
    if (!log) throw Error(ErrorCode::IoFailure, "cannot write loss log in " + opt.out_dir.string());
  }

  const bool with_edges = !net.config().ablation.no_edge_module;
  const ad::AdamOptions adam{opt.train.lr, 0.9, 0.999, 1e-8};
  auto params = net.params();
  TrainResult result;
  std::vector<std::size_t> order(data.size());

  auto save = [&](int epoch) {
    if (opt.out_dir.empty()) return;
    ckpt::CheckpointInfo info;
    info.iteration = result.iterations;
    info.epoch = epoch;
    info.extra = opt.run_config;
    char name[64];
    std::snprintf(name, sizeof name, "checkpoint_epoch%03d.ckpt", epoch);
    ckpt::save_checkpoint(opt.out_dir / name, net, info);
    ckpt::save_checkpoint(opt.out_dir / kCheckpointName, net, info);
    result.checkpoint = opt.out_dir / kCheckpointName;
  };

  for (int epoch = 1; epoch <= opt.train.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(net.config().seed), static_cast<std::uint32_t>(net.config().seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    bool stop = false;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.train.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.train.batch));
      std::vector<const net::InputTensors*> inputs;
      std::vector<const IntrinsicSample*> samples;
      std::vector<const priors::EdgePyramid*> edges;
      for (std::size_t i = start; i < end; ++i) {
        const PreparedSample& p = data[order[i]];
        inputs.push_back(&p.inputs);
        samples.push_back(&p.sample);
        edges.push_back(&p.edges);
      }
      const auto batch_in = net::stack_inputs<float>(inputs);
      const auto targets = loss::make_targets<float>(samples, edges);
      const auto out = net.forward(batch_in, ad::Mode::Train);
      const auto terms = loss::compute_losses(out, targets, opt.weights, with_edges);
      const loss::LossReport report = terms.report();
      const std::int64_t iter = result.iterations + 1;
      if (!std::isfinite(report.total)) {
        throw Error(ErrorCode::NonFiniteLoss, "non-finite loss at iteration " + std::to_string(iter));
      }
      terms.total.backward();
      ad::adam_step<float>(params, adam);
      result.iterations = iter;
      result.losses.push_back(report);
      if (log) log << loss_log_line(iter, report) << '\n' << std::flush;
      if (opt.on_step) opt.on_step(iter, report);
      if (opt.train.max_iters > 0 && iter >= opt.train.max_iters) {
        stop = true;
        break;
      }
    }
    save(epoch);
    if (stop) break;
  }
  return result;
}

}  // namespace iid::train
