#include "iidlab/evaluate.hpp"

#include "iidlab/checkpoint.hpp"
#include "iidlab/ops.hpp"

namespace iid::eval {

namespace {

template <int C>
Raster<C> to_raster(const ad::Tensor<float>& t) {
  const ad::Shape s = t.shape();
  if (s.n != 1 || s.c != C) throw Error(ErrorCode::ShapeMismatch, "expected a single " + std::to_string(C) + "-channel map");
  Raster<C> img(s.h, s.w);
  const auto v = t.values();
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) img.at(y, x, c) = v[(static_cast<std::size_t>(c) * s.h + y) * s.w + x];
    }
  }
  return img;
}

}  // namespace

Decomposition predict(net::SigNet<float>& net, const net::InputTensors& inputs) {
  ad::NoGradGuard guard;
  const net::InputTensors* items[] = {&inputs};
  const auto out = net.forward(net::stack_inputs<float>(items), ad::Mode::Eval);
  return Decomposition{to_raster<3>(out.r_initial), to_raster<3>(out.r_final), to_raster<1>(out.s_initial),
                       to_raster<1>(out.s_final), to_raster<1>(out.edge_full)};
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["split"] = split;
  j["arch_hash"] = arch_hash;
  j["gt_bypass"] = gt_bypass;
  j["count"] = images.size();
  j["aggregate"] = aggregate.to_json();
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const ImageResult& r : images) {
    nlohmann::ordered_json e;
    e["name"] = r.name;
    e["metrics"] = r.metrics.to_json();
    per.push_back(std::move(e));
  }
  j["images"] = std::move(per);
  return j;
}

EvalReport evaluate(net::SigNet<float>& net, std::span<const train::PreparedSample> samples, const EvalOptions& opt) {
  if (samples.empty()) throw Error(ErrorCode::EmptySplit, "evaluate: the split has no samples");
  EvalReport report;
  report.gt_bypass = opt.gt_bypass;
  report.arch_hash = net.architecture_hash();
  std::vector<metrics::MetricReport> all;
  for (const train::PreparedSample& p : samples) {
    const IntrinsicSample& gt = p.sample;
    metrics::MetricReport m;
    if (opt.gt_bypass) {
      m = metrics::score(gt.reflectance, gt.shading, gt.reflectance, gt.shading);
    } else {
      const Decomposition d = predict(net, p.inputs);
      m = metrics::score(d.r_final, d.s_final, gt.reflectance, gt.shading);
    }
    report.images.push_back({p.name, m});
    all.push_back(m);
  }
  report.aggregate = metrics::mean_report(all);
  return report;
}

EvalReport evaluate(const synth::Manifest& manifest, synth::Split split, const std::filesystem::path& checkpoint,
                    const EvalOptions& opt, const net::ModelConfig* expected) {
  ckpt::CheckpointInfo info = ckpt::read_checkpoint_info(checkpoint);
  if (expected) {
    net::SigNet<float> probe(*expected);
    if (probe.architecture_hash() != info.arch_hash) {
      throw Error(ErrorCode::CheckpointMismatch,
                  "checkpoint architecture " + info.arch_hash + " does not match the configured model " +
                      probe.architecture_hash());
    }
  }
  net::SigNet<float> net = ckpt::restore_net(checkpoint, &info);
  if (manifest.select(split).empty()) {
    throw Error(ErrorCode::EmptySplit, "evaluate: split '" + std::string(synth::to_string(split)) + "' is empty");
  }
  const auto samples = train::prepare_split(manifest, split, info.model.ablation);
  EvalReport report = evaluate(net, samples, opt);
  report.split = std::string(synth::to_string(split));
  return report;
}

}  // namespace iid::eval
