#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "iidlab/checkpoint.hpp"
#include "iidlab/config.hpp"
#include "iidlab/evaluate.hpp"
#include "iidlab/synthgen.hpp"
#include "iidlab/train.hpp"

using namespace iid;
using namespace iid::ckpt;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

net::ModelConfig tiny(std::uint64_t seed = 1) {
  net::ModelConfig c;
  c.base_width = 4;
  c.input_size = 32;
  c.seed = seed;
  return c;
}

std::vector<train::PreparedSample> scenes(int count) {
  synth::SynthConfig cfg;
  cfg.size = 32;
  std::vector<train::PreparedSample> out;
  for (int i = 0; i < count; ++i) out.push_back(train::prepare_sample(synth::sample_scene(cfg, i), {}, ""));
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::BadInput;
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("save and load restore every tensor") {
  TempDir dir;
  const auto data = scenes(4);
  net::SigNet<float> net(tiny());
  train::TrainOptions opt;
  opt.train.epochs = 1;
  opt.train.batch = 2;
  opt.train.lr = 1e-3;
  train::train_loop(net, data, opt);
  ckpt::CheckpointInfo info;
  info.model = net.config();
  info.iteration = 2;
  info.epoch = 1;
  info.extra = {{"note", "x"}};
  save_checkpoint(dir / "a.ckpt", net, info);

  net::SigNet<float> other(tiny(99));
  const auto back = load_checkpoint(dir / "a.ckpt", other);
  CHECK(back.iteration == 2);
  CHECK(back.epoch == 1);
  CHECK(back.extra["note"] == "x");
  CHECK(back.arch_hash == net.architecture_hash());
  auto pa = net.params(), pb = other.params();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(std::equal(pa[i]->tensor.values().begin(), pa[i]->tensor.values().end(), pb[i]->tensor.values().begin()));
    CHECK(pa[i]->m == pb[i]->m);
    CHECK(pa[i]->v == pb[i]->v);
    CHECK(pa[i]->step == pb[i]->step);
  }
  for (std::size_t i = 0; i < net.store().buffers().size(); ++i) {
    CHECK(net.store().buffers()[i].state.running_mean == other.store().buffers()[i].state.running_mean);
    CHECK(net.store().buffers()[i].state.running_var == other.store().buffers()[i].state.running_var);
  }

  const auto in = [&] {
    const net::InputTensors* items[] = {&data[0].inputs};
    return net::stack_inputs<float>(items);
  }();
  const auto oa = net.forward(in, ad::Mode::Eval), ob = other.forward(in, ad::Mode::Eval);
  CHECK(std::equal(oa.r_final.values().begin(), oa.r_final.values().end(), ob.r_final.values().begin()));

  auto restored = ckpt::restore_net(dir / "a.ckpt");
  CHECK(restored.config().seed == 1);
  CHECK(restored.parameter_count() == net.parameter_count());
}

TEST_CASE("architecture mismatch and damaged files") {
  TempDir dir;
  net::SigNet<float> net(tiny());
  ckpt::CheckpointInfo info;
  info.model = net.config();
  save_checkpoint(dir / "a.ckpt", net, info);

  net::ModelConfig wide = tiny();
  wide.base_width = 8;
  net::SigNet<float> other(wide);
  CHECK(code_of([&] { load_checkpoint(dir / "a.ckpt", other); }) == ErrorCode::CheckpointMismatch);
  net::ModelConfig ablated = tiny();
  ablated.ablation.no_edge_module = true;
  net::SigNet<float> third(ablated);
  CHECK(code_of([&] { load_checkpoint(dir / "a.ckpt", third); }) == ErrorCode::CheckpointMismatch);

  CHECK(code_of([&] { ckpt::read_checkpoint_info(dir / "missing.ckpt"); }) == ErrorCode::MissingFile);
  {
    std::ofstream(dir / "junk.ckpt") << "not a checkpoint at all";
  }
  CHECK(code_of([&] { ckpt::read_checkpoint_info(dir / "junk.ckpt"); }) == ErrorCode::HeaderMismatch);

  const std::string bytes = testutil::read_bytes(dir / "a.ckpt");
  {
    std::ofstream out(dir / "short.ckpt", std::ios::binary);
    out << bytes.substr(0, bytes.size() - 100);
  }
  net::SigNet<float> fresh(tiny());
  CHECK(code_of([&] { load_checkpoint(dir / "short.ckpt", fresh); }) == ErrorCode::TruncatedPayload);
}

TEST_CASE("manifest evaluation rejects a checkpoint from another architecture") {
  TempDir dir;
  synth::SynthConfig sc;
  sc.size = 32;
  const auto manifest_path = synth::generate_dataset(sc, 10, dir / "data");
  const auto manifest = synth::load_manifest(manifest_path);
  net::SigNet<float> net(tiny());
  ckpt::CheckpointInfo info;
  info.model = net.config();
  save_checkpoint(dir / "a.ckpt", net, info);
  const auto rep = eval::evaluate(manifest, synth::Split::Test, dir / "a.ckpt");
  CHECK(rep.images.size() == 1);
  CHECK(rep.arch_hash == net.architecture_hash());
  net::ModelConfig wide = tiny();
  wide.base_width = 8;
  CHECK(code_of([&] { eval::evaluate(manifest, synth::Split::Test, dir / "a.ckpt", {}, &wide); }) ==
        ErrorCode::CheckpointMismatch);
}

TEST_CASE("training writes a loss log, architecture report and checkpoints") {
  TempDir dir;
  const auto data = scenes(4);
  net::SigNet<float> net(tiny());
  train::TrainOptions opt;
  opt.train.epochs = 2;
  opt.train.batch = 2;
  opt.out_dir = dir.path();
  std::int64_t calls = 0;
  opt.on_step = [&](std::int64_t, const loss::LossReport&) { ++calls; };
  const auto r = train::train_loop(net, data, opt);
  CHECK(r.iterations == 4);
  CHECK(calls == 4);
  CHECK(fs::exists(dir / train::kArchitectureName));
  CHECK(fs::exists(dir / "checkpoint_epoch001.ckpt"));
  CHECK(fs::exists(dir / "checkpoint_epoch002.ckpt"));
  CHECK(r.checkpoint == dir / train::kCheckpointName);
  CHECK(ckpt::read_checkpoint_info(r.checkpoint).iteration == 4);
  std::ifstream log(dir / train::kLossLogName);
  std::string line;
  int n = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["iter"] == ++n);
    for (const char* k : {"L_e", "L_i", "L_f", "L_Norm", "L_TV", "L_dssim", "total"}) CHECK(j.contains(k));
  }
  CHECK(n == 4);

  opt.train.max_iters = 3;
  opt.out_dir.clear();
  net::SigNet<float> again(tiny());
  CHECK(train::train_loop(again, data, opt).iterations == 3);
}

TEST_CASE("non-finite loss names the iteration") {
  auto data = scenes(2);
  for (float& v : data[1].sample.image.data()) v = std::numeric_limits<float>::quiet_NaN();
  net::SigNet<float> net(tiny());
  train::TrainOptions opt;
  opt.train.batch = 1;
  opt.train.epochs = 1;
  try {
    train::train_loop(net, data, opt);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}

TEST_CASE("run configuration") {
  const auto c = cfg::run_config_from_json(nlohmann::json::object());
  CHECK(c.train.epochs == 60);
  CHECK(c.train.lr == 2e-4);
  CHECK(c.train.batch == 4);
  CHECK(c.model.base_width == 8);
  CHECK(c.model.input_size == 64);
  CHECK(c.loss.lambda_e == 0.4);
  CHECK(cfg::run_config_from_json(cfg::to_json(c)).train.lr == 2e-4);
  CHECK(code_of([] { cfg::run_config_from_json({{"optimizer", {}}}); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { cfg::run_config_from_json({{"train", {{"momentum", 1}}}}); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { cfg::run_config_from_json({{"train", {{"batch", 0}}}}); }) == ErrorCode::InvalidConfig);

  nlohmann::json doc = nlohmann::json::object();
  cfg::apply_override(doc, "train.lr=0.001");
  cfg::apply_override(doc, "paths.out_dir=somewhere");
  cfg::apply_override(doc, "model.ablation.no_priors=true");
  CHECK(doc["train"]["lr"] == 0.001);
  CHECK(doc["paths"]["out_dir"] == "somewhere");
  const auto o = cfg::run_config_from_json(doc);
  CHECK(o.model.ablation.no_priors);
  CHECK(o.paths.out_dir == "somewhere");
  CHECK_THROWS_AS(cfg::apply_override(doc, "novalue"), Error);
}

}  // TEST_SUITE
