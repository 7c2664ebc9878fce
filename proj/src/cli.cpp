#include "iidlab/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "iidlab/checkpoint.hpp"
#include "iidlab/config.hpp"
#include "iidlab/evaluate.hpp"
#include "iidlab/gradcheck.hpp"
#include "iidlab/image_io.hpp"
#include "iidlab/metrics.hpp"
#include "iidlab/ops.hpp"
#include "iidlab/prior_files.hpp"
#include "iidlab/train.hpp"

namespace iid::cli {

namespace fs = std::filesystem;

namespace {

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run configuration");
    app->add_option("--set", overrides, "Override a config value, e.g. train.lr=1e-3")->take_all();
  }

  cfg::RunConfig resolve() const {
    nlohmann::json doc = nlohmann::json::object();
    if (!config_path.empty()) doc = cfg::to_json(cfg::load_run_config(config_path));
    for (const auto& o : overrides) cfg::apply_override(doc, o);
    return cfg::run_config_from_json(doc);
  }
};

void write_json(const nlohmann::ordered_json& j, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << j.dump(2) << '\n';
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  f << j.dump(2) << '\n';
  out << p.string() << '\n';
}

IntrinsicSample load_inference_input(const std::string& image, const std::string& segments) {
  IntrinsicSample s;
  s.image = io::load_png(image);
  s.segments = io::load_segments(segments);
  if (s.segments.height() != s.image.height() || s.segments.width() != s.image.width()) {
    throw Error(ErrorCode::SizeMismatch, "segment map does not match the image size");
  }
  return s;
}

net::InputTensors inference_inputs(const IntrinsicSample& s, const net::ModelConfig& model) {
  if (s.image.height() != model.input_size || s.image.width() != model.input_size) {
    throw Error(ErrorCode::SizeMismatch, "image size does not match the checkpoint's input_size");
  }
  return net::make_inputs(s.image, s.segments, priors::compute_bundle(s.image, s.segments), model.ablation);
}

int cmd_synth(const cfg::RunConfig& rc, std::size_t count, const std::string& out_dir, std::ostream& out) {
  const fs::path dir = out_dir.empty() ? rc.paths.data_dir : fs::path(out_dir);
  out << synth::generate_dataset(rc.synth, count, dir).string() << '\n';
  return kExitOk;
}

int cmd_priors(const std::string& manifest_path, const std::string& out_dir, std::ostream& out) {
  const synth::Manifest m = synth::load_manifest(manifest_path);
  const fs::path dir = out_dir.empty() ? m.root / "priors" : fs::path(out_dir);
  fs::create_directories(dir);
  for (const auto& e : m.samples) {
    const IntrinsicSample s = synth::load_sample(m, e);
    priors::PriorBundle b = priors::compute_bundle(s.image, s.segments);
    b.edge_pyramid = priors::canny_edge_pyramid(s.reflectance);
    priors::write_bundle(b, dir, e.image.stem().string());
  }
  out << dir.string() << '\n';
  return kExitOk;
}

int cmd_train(cfg::RunConfig rc, const std::string& manifest_path, const std::string& out_dir,
              const net::Ablation& flags, std::ostream& out) {
  rc.model.ablation.no_priors |= flags.no_priors;
  rc.model.ablation.no_edge_module |= flags.no_edge_module;
  rc.model.ablation.image_edges |= flags.image_edges;
  rc.model.validate();
  if (!out_dir.empty()) rc.paths.out_dir = out_dir;
  const fs::path mpath = manifest_path.empty() ? rc.paths.data_dir / synth::kManifestName : fs::path(manifest_path);
  const synth::Manifest m = synth::load_manifest(mpath);
  const auto data = train::prepare_split(m, synth::Split::Train, rc.model.ablation);
  if (data.front().sample.image.height() != rc.model.input_size ||
      data.front().sample.image.width() != rc.model.input_size) {
    throw Error(ErrorCode::SizeMismatch, "dataset images do not match model.input_size");
  }
  net::SigNet<float> net(rc.model);
  train::TrainOptions opt;
  opt.train = rc.train;
  opt.weights = rc.loss;
  opt.out_dir = rc.paths.out_dir;
  opt.run_config = cfg::to_json(rc);
  fs::create_directories(opt.out_dir);
  std::ofstream(opt.out_dir / "config.json") << opt.run_config.dump(2) << '\n';
  const auto result = train::train_loop(net, data, opt);
  out << result.checkpoint.string() << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint, manifest, split = "test", judgments, reflectance, image, segments, out;
  bool gt_bypass = false;
};

int cmd_eval(const EvalArgs& a, const ConfigArgs& config_args, std::ostream& out) {
  if (!a.judgments.empty()) {
    const metrics::JudgmentSet set = metrics::load_judgments(a.judgments);
    ImageRGB refl;
    if (!a.reflectance.empty()) {
      const fs::path p(a.reflectance);
      refl = p.extension() == ".pfm" ? io::load_pfm_rgb(p) : io::load_png(p);
    } else {
      if (a.checkpoint.empty() || a.image.empty() || a.segments.empty()) {
        throw Error(ErrorCode::BadInput, "eval --judgments needs --reflectance, or --checkpoint with --image and --segments");
      }
      ckpt::CheckpointInfo info;
      net::SigNet<float> net = ckpt::restore_net(a.checkpoint, &info);
      const IntrinsicSample s = load_inference_input(a.image, a.segments);
      refl = eval::predict(net, inference_inputs(s, info.model)).r_final;
    }
    nlohmann::ordered_json j;
    j["whdr"] = metrics::whdr(refl, set);
    j["judgments"] = set.judgments.size();
    write_json(j, a.out, out);
    return kExitOk;
  }
  if (a.checkpoint.empty() || a.manifest.empty()) {
    throw Error(ErrorCode::BadInput, "eval needs --checkpoint and --manifest (or --judgments)");
  }
  const synth::Manifest m = synth::load_manifest(a.manifest);
  std::optional<net::ModelConfig> expected;
  if (!config_args.config_path.empty() || !config_args.overrides.empty()) expected = config_args.resolve().model;
  eval::EvalOptions opt;
  opt.gt_bypass = a.gt_bypass;
  const eval::EvalReport report =
      eval::evaluate(m, synth::parse_split(a.split), a.checkpoint, opt, expected ? &*expected : nullptr);
  write_json(report.to_json(), a.out, out);
  return kExitOk;
}

int cmd_infer(const std::string& checkpoint, const std::string& image, const std::string& segments,
              const std::string& out_dir, std::ostream& out) {
  ckpt::CheckpointInfo info;
  net::SigNet<float> net = ckpt::restore_net(checkpoint, &info);
  const IntrinsicSample s = load_inference_input(image, segments);
  const eval::Decomposition d = eval::predict(net, inference_inputs(s, info.model));
  const fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(dir);
  const std::string stem = fs::path(image).stem().string();
  io::save_pfm(d.r_final, dir / (stem + ".reflectance.pfm"));
  io::save_pfm(d.s_final, dir / (stem + ".shading.pfm"));
  io::save_png(d.r_final, dir / (stem + ".reflectance.png"));
  io::save_png(clamp01(d.s_final), dir / (stem + ".shading.png"));
  io::save_png(d.edge_full, dir / (stem + ".edges.png"));
  io::save_pfm(d.r_initial, dir / (stem + ".reflectance_initial.pfm"));
  io::save_pfm(d.s_initial, dir / (stem + ".shading_initial.pfm"));
  out << dir.string() << '\n';
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& fault, std::ostream& out) {
  if (fault == "conv-sign") ad::testing::set_fault(ad::testing::Fault::ConvBackwardSignFlip);
  else if (!fault.empty()) throw Error(ErrorCode::BadInput, "unknown fault '" + fault + "'");
  gc::SuiteOptions opt;
  opt.seed = seed;
  std::vector<gc::CheckResult> results;
  try {
    results = gc::run_suite(opt);
  } catch (...) {
    ad::testing::set_fault(ad::testing::Fault::None);
    throw;
  }
  ad::testing::set_fault(ad::testing::Fault::None);
  double total = 0.0;
  out << std::left << std::setw(24) << "check" << std::setw(7) << "cases" << std::setw(13) << "max_rel_err"
      << std::setw(10) << "tol" << "result\n";
  for (const auto& r : results) {
    out << std::left << std::setw(24) << r.name << std::setw(7) << r.cases << std::setw(13) << std::setprecision(3)
        << std::scientific << r.max_error << std::setw(10) << r.tolerance << std::defaultfloat
        << (r.passed ? "PASS" : "FAIL") << '\n';
    total += r.seconds;
  }
  const bool ok = gc::all_passed(results);
  out << (ok ? "all checks passed" : "gradient check FAILED") << " (" << std::fixed << std::setprecision(1)
      << total << " s)\n" << std::defaultfloat;
  return ok ? kExitOk : kExitInternal;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Intrinsic image decomposition toolkit", "iidlab"};
  app.require_subcommand(1);

  ConfigArgs config_args;

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  config_args.attach(synth_cmd);
  std::size_t count = 0;
  std::string synth_out;
  synth_cmd->add_option("--count", count, "Number of scenes")->required();
  synth_cmd->add_option("--out", synth_out, "Output directory (default paths.data_dir)");

  auto* priors_cmd = app.add_subcommand("priors", "Write prior maps for every sample of a manifest");
  std::string priors_manifest, priors_out;
  priors_cmd->add_option("--manifest", priors_manifest, "manifest.json")->required();
  priors_cmd->add_option("--out", priors_out, "Output directory (default <dataset>/priors)");

  auto* train_cmd = app.add_subcommand("train", "Train on the train split of a manifest");
  config_args.attach(train_cmd);
  std::string train_manifest, train_out;
  net::Ablation flags;
  train_cmd->add_option("--manifest", train_manifest, "manifest.json (default <paths.data_dir>/manifest.json)");
  train_cmd->add_option("--out", train_out, "Run directory (default paths.out_dir)");
  train_cmd->add_flag("--no-priors", flags.no_priors, "Image encoder only");
  train_cmd->add_flag("--no-edge-module", flags.no_edge_module, "Drop the reflectance edge module");
  train_cmd->add_flag("--image-edges", flags.image_edges, "Feed image Canny edges instead of CCR maps");

  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a split, or WHDR on judgments");
  config_args.attach(eval_cmd);
  EvalArgs ea;
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "Checkpoint file");
  eval_cmd->add_option("--manifest", ea.manifest, "manifest.json");
  eval_cmd->add_option("--split", ea.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_flag("--gt-bypass", ea.gt_bypass, "Score ground truth against itself");
  eval_cmd->add_option("--judgments", ea.judgments, "Judgments JSON for WHDR");
  eval_cmd->add_option("--reflectance", ea.reflectance, "Predicted reflectance (PNG or PFM) for WHDR");
  eval_cmd->add_option("--image", ea.image, "Input image for WHDR via the network");
  eval_cmd->add_option("--segments", ea.segments, "Segment label PNG for --image");
  eval_cmd->add_option("--out", ea.out, "Report path (default stdout)");

  auto* infer_cmd = app.add_subcommand("infer", "Decompose one image");
  std::string infer_ckpt, infer_image, infer_segments, infer_out;
  infer_cmd->add_option("--checkpoint", infer_ckpt, "Checkpoint file")->required();
  infer_cmd->add_option("--image", infer_image, "Input PNG")->required();
  infer_cmd->add_option("--segments", infer_segments, "Segment label PNG (with .json sidecar)")->required();
  infer_cmd->add_option("--out", infer_out, "Output directory");

  auto* gc_cmd = app.add_subcommand("gradcheck", "Run the gradient-check suite");
  std::uint64_t gc_seed = 0;
  std::string fault;
  gc_cmd->add_option("--seed", gc_seed, "Random seed");
  gc_cmd->add_option("--inject-fault", fault, "Deliberate defect to detect")->check(CLI::IsMember({"conv-sign"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: BadInput: " << e.what() << '\n';
    return kExitBadInput;
  }

  try {
    if (*synth_cmd) return cmd_synth(config_args.resolve(), count, synth_out, out);
    if (*priors_cmd) return cmd_priors(priors_manifest, priors_out, out);
    if (*train_cmd) return cmd_train(config_args.resolve(), train_manifest, train_out, flags, out);
    if (*eval_cmd) return cmd_eval(ea, config_args, out);
    if (*infer_cmd) return cmd_infer(infer_ckpt, infer_image, infer_segments, infer_out, out);
    if (*gc_cmd) return cmd_gradcheck(gc_seed, fault, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return e.is_input_error() ? kExitBadInput : kExitInternal;
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace iid::cli
