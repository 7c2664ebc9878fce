#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "iidlab/losses.hpp"
#include "iidlab/signet.hpp"
#include "iidlab/synthgen.hpp"
#include "iidlab/train.hpp"

using namespace iid;
using namespace iid::net;

namespace {

synth::SynthConfig scene_config(int size) {
  synth::SynthConfig c;
  c.size = size;
  c.seed = 11;
  return c;
}

std::vector<train::PreparedSample> scenes(int size, int count, const Ablation& ab = {}) {
  std::vector<train::PreparedSample> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(train::prepare_sample(synth::sample_scene(scene_config(size), i), ab, "s" + std::to_string(i)));
  }
  return out;
}

NetInputs<float> batch_of(const std::vector<train::PreparedSample>& data) {
  std::vector<const InputTensors*> items;
  for (const auto& d : data) items.push_back(&d.inputs);
  return stack_inputs<float>(items);
}

ModelConfig small(int width = 4, int size = 32) {
  ModelConfig c;
  c.base_width = width;
  c.input_size = size;
  c.seed = 3;
  return c;
}

void check_ranges(const ForwardOutputs<float>& o) {
  for (const auto* t : {&o.edge_full, &o.edge_half, &o.edge_quarter, &o.r_initial, &o.r_final}) {
    for (float v : t->values()) {
      REQUIRE(std::isfinite(v));
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  for (const auto* t : {&o.s_initial, &o.s_final}) {
    for (float v : t->values()) {
      REQUIRE(std::isfinite(v));
      CHECK(v >= 0.0f);
    }
  }
}

}  // namespace

TEST_SUITE("signet") {

TEST_CASE("config validation") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  c.base_width = 12;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.input_size = 40;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(model_config_from_json({{"stages", 4}}), Error);
  CHECK_THROWS_AS(model_config_from_json({{"depth", 4}}), Error);
  CHECK(model_config_from_json({{"base_width", 16}, {"stages", 5}}).base_width == 16);
  Ablation ab;
  ab.no_priors = true;
  ab.image_edges = true;
  CHECK_THROWS_AS(ab.validate(), Error);
}

TEST_CASE("two builds with the same seed have identical parameters") {
  SigNet<float> a(small()), b(small());
  auto pa = a.params(), pb = b.params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(std::equal(pa[i]->tensor.values().begin(), pa[i]->tensor.values().end(),
                     pb[i]->tensor.values().begin()));
  }
  ModelConfig other = small();
  other.seed = 4;
  SigNet<float> c(other);
  CHECK(c.architecture_hash() == a.architecture_hash());
  CHECK(c.parameter_count() == a.parameter_count());
}

TEST_CASE("bottleneck of a width-8 net on 64 pixels is 4x4") {
  SigNet<float> net(small(8, 64));
  const auto report = net.architecture_report();
  bool found = false;
  for (const auto& l : report["layers"]) {
    if (l["name"] == "enc_image.f5") {
      CHECK(l["output"][1] == 4);
      CHECK(l["output"][2] == 4);
      CHECK(l["output"][0] == 64);
      found = true;
    }
  }
  CHECK(found);
  CHECK(report["input_encoders"] == 5);
}

TEST_CASE("doubling the width roughly quadruples the parameter count") {
  const double p8 = static_cast<double>(SigNet<float>(small(8, 64)).parameter_count());
  const double p16 = static_cast<double>(SigNet<float>(small(16, 64)).parameter_count());
  const double p32 = static_cast<double>(SigNet<float>(small(32, 64)).parameter_count());
  CHECK(p16 / p8 > 3.5);
  CHECK(p16 / p8 < 4.1);
  CHECK(p32 / p16 > 3.8);
  CHECK(p32 / p16 < 4.05);
}

TEST_CASE("make_inputs channel layout") {
  const int h = 8, w = 8;
  std::vector<std::int32_t> labels(h * w);
  for (int i = 0; i < h * w; ++i) labels[i] = (i % w) < 3 ? 0 : ((i % w) < 6 ? 1 : 2);
  SegmentMap seg(h, w, labels, {SemanticClass::Wall, SemanticClass::Other, SemanticClass::Ceiling});
  const ImageRGB img(h, w, 0.4f);
  const auto bundle = priors::compute_bundle(img, seg);
  const auto in = make_inputs(img, seg, bundle);
  CHECK(in.image.shape() == Shape{1, 3, h, w});
  CHECK(in.semantic.shape() == Shape{1, 18, h, w});
  CHECK(in.ccr.shape() == Shape{1, 7, h, w});
  CHECK(in.r_est.shape() == Shape{1, 3, h, w});
  CHECK(in.s_est.shape() == Shape{1, 1, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = seg.label(y, x);
      for (int c = 0; c < 16; ++c) CHECK(in.semantic.at(0, c, y, x) == (c == l ? 1.0f : 0.0f));
      CHECK(in.semantic.at(0, 16, y, x) == (l == 0 ? 1.0f : 0.0f));
      CHECK(in.semantic.at(0, 17, y, x) == (l == 2 ? 1.0f : 0.0f));
      for (int c = 0; c < 7; ++c) CHECK(in.ccr.at(0, c, y, x) == 0.0f);
    }
  }
  Ablation ab;
  ab.image_edges = true;
  CHECK(make_inputs(img, seg, bundle, ab).ccr.shape() == Shape{1, 1, h, w});
  CHECK_THROWS_AS(make_inputs(ImageRGB(h, w + 1), seg, bundle), Error);
}

TEST_CASE("labels past the one-hot width fold into the last channel") {
  std::vector<std::int32_t> labels(20);
  std::vector<SemanticClass> classes(20, SemanticClass::Other);
  for (int i = 0; i < 20; ++i) labels[i] = i;
  SegmentMap seg(1, 20, labels, classes);
  const ImageRGB img(1, 20, 0.5f);
  const auto in = make_inputs(img, seg, priors::compute_bundle(img, seg));
  for (int x = 15; x < 20; ++x) CHECK(in.semantic.at(0, 15, 0, x) == 1.0f);
  CHECK(in.semantic.at(0, 14, 0, 14) == 1.0f);
}

TEST_CASE("attention gate") {
  std::mt19937_64 rng(1);
  const auto x = testutil::random_tensor(rng, {2, 3, 4, 4});
  const auto open = attention(ad::Tensor<double>::full(x.shape(), 30.0), x);
  const auto half = attention(ad::Tensor<double>::zeros(x.shape()), x);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(std::abs(open.values()[i] - x.values()[i]) <= 1e-9 * std::max(1.0, std::abs(x.values()[i])) + 1e-12);
    CHECK(half.values()[i] == 0.5 * x.values()[i]);
  }
  CHECK_THROWS_AS(attention(ad::Tensor<double>::zeros({2, 1, 4, 4}), x), Error);
}

TEST_CASE("output shapes, ranges and eval determinism") {
  const auto data = scenes(64, 2);
  SigNet<float> net(small(8, 64));
  const auto in = batch_of(data);
  const auto a = net.forward(in, Mode::Eval);
  const auto b = net.forward(in, Mode::Eval);
  CHECK(a.r_final.shape() == Shape{2, 3, 64, 64});
  CHECK(a.s_final.shape() == Shape{2, 1, 64, 64});
  CHECK(a.r_initial.shape() == Shape{2, 3, 64, 64});
  CHECK(a.edge_full.shape() == Shape{2, 1, 64, 64});
  CHECK(a.edge_half.shape() == Shape{2, 1, 32, 32});
  CHECK(a.edge_quarter.shape() == Shape{2, 1, 16, 16});
  CHECK(std::equal(a.r_final.values().begin(), a.r_final.values().end(), b.r_final.values().begin()));
  CHECK(std::equal(a.s_final.values().begin(), a.s_final.values().end(), b.s_final.values().begin()));
  check_ranges(a);
  check_ranges(net.forward(in, Mode::Train));
}

TEST_CASE("zero heads give 0.5 reflectance and 0 shading") {
  const auto data = scenes(32, 2);
  SigNet<float> net(small());
  for (auto* h : net.heads()) {
    for (float& v : h->weight()->tensor.mutable_values()) v = 0.0f;
    if (h->bias()) {
      for (float& v : h->bias()->tensor.mutable_values()) v = 0.0f;
    }
  }
  const auto o = net.forward(batch_of(data), Mode::Eval);
  for (float v : o.r_final.values()) CHECK(v == 0.5f);
  for (float v : o.s_final.values()) CHECK(v == 0.0f);
  for (float v : o.edge_full.values()) CHECK(v == 0.5f);
}

TEST_CASE("output shapes do not depend on width or ablation") {
  const auto data = scenes(32, 1);
  Shape ref{1, 3, 32, 32};
  for (int w : {4, 8, 16}) {
    SigNet<float> net(small(w));
    CHECK(net.forward(batch_of(data), Mode::Eval).r_final.shape() == ref);
  }
  for (int variant = 0; variant < 3; ++variant) {
    ModelConfig c = small();
    if (variant == 0) c.ablation.no_priors = true;
    if (variant == 1) c.ablation.no_edge_module = true;
    if (variant == 2) c.ablation.image_edges = true;
    const auto d = scenes(32, 1, c.ablation);
    SigNet<float> net(c);
    const auto o = net.forward(batch_of(d), Mode::Eval);
    CHECK(o.r_final.shape() == ref);
    CHECK(o.s_final.shape() == Shape{1, 1, 32, 32});
    CHECK(o.edge_half.shape() == Shape{1, 1, 16, 16});
    check_ranges(o);
    if (variant == 0) CHECK(net.input_encoder_count() == 1);
    if (variant == 1) {
      for (float v : o.edge_full.values()) CHECK(v == 0.0f);
    }
    if (variant == 2) CHECK(net.ccr_input_channels() == 1);
  }
}

TEST_CASE("one step reaches every parameter") {
  const auto data = scenes(32, 2);
  SigNet<float> net(small());
  const auto in = batch_of(data);
  const auto o = net.forward(in, Mode::Train);
  std::vector<const IntrinsicSample*> ss;
  std::vector<const priors::EdgePyramid*> es;
  for (const auto& d : data) {
    ss.push_back(&d.sample);
    es.push_back(&d.edges);
  }
  const auto gt = loss::make_targets<float>(ss, es);
  loss::compute_losses(o, gt, {}).total.backward();
  auto params = net.params();
  ad::adam_step<float>(params);
  for (const auto* p : params) {
    INFO(p->name);
    CHECK(std::any_of(p->v.begin(), p->v.end(), [](float v) { return v > 0.0f; }));
  }
}

TEST_CASE("lr 0 keeps the loss constant") {
  const auto data = scenes(32, 1);
  SigNet<float> net(small());
  train::TrainOptions opt;
  opt.train.lr = 0.0;
  opt.train.batch = 1;
  opt.train.epochs = 2;
  std::vector<train::PreparedSample> repeated(4, data[0]);
  const auto r = train::train_loop(net, repeated, opt);
  REQUIRE(r.losses.size() == 8);
  for (const auto& l : r.losses) CHECK(std::abs(l.total - r.losses[0].total) <= 1e-3);
}

TEST_CASE("training is deterministic") {
  const auto data = scenes(32, 6);
  train::TrainOptions opt;
  opt.train.lr = 1e-3;
  opt.train.batch = 2;
  opt.train.epochs = 1;
  SigNet<float> a(small()), b(small());
  const auto ra = train::train_loop(a, data, opt);
  const auto rb = train::train_loop(b, data, opt);
  REQUIRE(ra.losses.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(train::loss_log_line(i + 1, ra.losses[i]) == train::loss_log_line(i + 1, rb.losses[i]));
  }
  CHECK_THROWS_AS(train::train_loop(a, std::span<const train::PreparedSample>(), opt), Error);
}

}  // TEST_SUITE
