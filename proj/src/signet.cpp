#include "iidlab/signet.hpp"

#include <cmath>
#include <cstdio>

namespace iid::net {

using ad::ConvBnRelu;
using ad::Conv2d;
using ad::DeconvBnRelu;

void Ablation::validate() const {
  if (no_priors && image_edges) {
    throw Error(ErrorCode::InvalidConfig,
                "--image-edges replaces a prior input and cannot be combined with --no-priors");
  }
}

void ModelConfig::validate() const {
  static constexpr int kWidths[] = {4, 8, 16, 32, 64};
  if (std::find(std::begin(kWidths), std::end(kWidths), base_width) == std::end(kWidths)) {
    throw Error(ErrorCode::InvalidConfig, "model: base_width must be one of 4, 8, 16, 32, 64");
  }
  if (input_size < 16 || input_size % 16 != 0) {
    throw Error(ErrorCode::InvalidConfig, "model: input_size must be a positive multiple of 16");
  }
  ablation.validate();
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"base_width", c.base_width},
          {"input_size", c.input_size},
          {"stages", ModelConfig::kStages},
          {"seed", c.seed},
          {"ablation",
           {{"no_priors", c.ablation.no_priors},
            {"no_edge_module", c.ablation.no_edge_module},
            {"image_edges", c.ablation.image_edges}}}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "model: expected an object");
  ModelConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "base_width") c.base_width = v.get<int>();
      else if (key == "input_size") c.input_size = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "stages") {
        if (v.get<int>() != ModelConfig::kStages) {
          throw Error(ErrorCode::InvalidConfig, "model: stages is fixed at 5");
        }
      } else if (key == "ablation") {
        for (const auto& [flag, b] : v.items()) {
          if (flag == "no_priors") c.ablation.no_priors = b.get<bool>();
          else if (flag == "no_edge_module") c.ablation.no_edge_module = b.get<bool>();
          else if (flag == "image_edges") c.ablation.image_edges = b.get<bool>();
          else throw Error(ErrorCode::InvalidConfig, "model.ablation: unknown key '" + flag + "'");
        }
      } else {
        throw Error(ErrorCode::InvalidConfig, "model: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("model: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Inputs

namespace {

Tensor<float> planar(int channels, int h, int w, std::vector<float> data) {
  return Tensor<float>::from(Shape{1, channels, h, w}, std::move(data));
}

template <int C>
Tensor<float> to_planar(const Raster<C>& img) {
  const int h = img.height(), w = img.width();
  std::vector<float> data(static_cast<std::size_t>(C) * h * w);
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) data[(static_cast<std::size_t>(c) * h + y) * w + x] = img.at(y, x, c);
    }
  }
  return planar(C, h, w, std::move(data));
}

}  // namespace

InputTensors make_inputs(const ImageRGB& image, const SegmentMap& seg,
                         const priors::PriorBundle& bundle, const Ablation& ablation) {
  const int h = image.height(), w = image.width();
  if (seg.height() != h || seg.width() != w || !bundle.r_est.same_size(image) ||
      !bundle.s_est.same_size(image) || !bundle.ccr.strength.same_size(image)) {
    throw Error(ErrorCode::SizeMismatch, "make_inputs: image, segments and priors disagree on size");
  }
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  InputTensors in;
  in.image = to_planar(image);

  std::vector<float> sem(kSemanticChannels * plane, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const int label = std::min(seg.label(y, x), kMaxSegmentChannels - 1);
      sem[label * plane + i] = 1.0f;
      const SemanticClass cls = seg.class_at(y, x);
      if (cls == SemanticClass::Wall) sem[kMaxSegmentChannels * plane + i] = 1.0f;
      if (cls == SemanticClass::Ceiling) sem[(kMaxSegmentChannels + 1) * plane + i] = 1.0f;
    }
  }
  in.semantic = planar(kSemanticChannels, h, w, std::move(sem));

  if (ablation.image_edges) {
    in.ccr = to_planar(priors::canny(luminance(image)));
  } else {
    const GrayImage* maps[] = {&bundle.ccr.right.rg, &bundle.ccr.right.rb, &bundle.ccr.right.gb,
                               &bundle.ccr.down.rg,  &bundle.ccr.down.rb,  &bundle.ccr.down.gb};
    std::vector<float> ccr(kCcrChannels * plane);
    for (int c = 0; c < 6; ++c) {
      const auto src = maps[c]->data();
      for (std::size_t i = 0; i < plane; ++i) ccr[c * plane + i] = std::log(src[i]);
    }
    const auto strength = bundle.ccr.strength.data();
    std::copy(strength.begin(), strength.end(), ccr.begin() + 6 * plane);
    in.ccr = planar(kCcrChannels, h, w, std::move(ccr));
  }
  in.r_est = to_planar(bundle.r_est);
  in.s_est = to_planar(bundle.s_est);
  return in;
}

template <typename T>
NetInputs<T> stack_inputs(std::span<const InputTensors* const> items) {
  if (items.empty()) throw Error(ErrorCode::BadInput, "stack_inputs: empty batch");
  auto stack = [&](auto member) {
    const Shape first = (items.front()->*member).shape();
    Shape s{static_cast<int>(items.size()), first.c, first.h, first.w};
    std::vector<T> data;
    data.reserve(s.numel());
    for (const InputTensors* it : items) {
      const Tensor<float>& t = it->*member;
      if (!(t.shape() == first)) {
        throw Error(ErrorCode::SizeMismatch, "stack_inputs: inconsistent input shapes");
      }
      for (float v : t.values()) data.push_back(static_cast<T>(v));
    }
    return Tensor<T>::from(s, std::move(data));
  };
  return NetInputs<T>{stack(&InputTensors::image), stack(&InputTensors::semantic),
                      stack(&InputTensors::ccr), stack(&InputTensors::r_est),
                      stack(&InputTensors::s_est)};
}

template <typename T>
Tensor<T> attention(const Tensor<T>& gate, const Tensor<T>& x) {
  if (!(gate.shape() == x.shape())) {
    throw Error(ErrorCode::ShapeMismatch, "attention: gate " + gate.shape().str() +
                                              " does not match input " + x.shape().str());
  }
  return ad::mul(x, ad::sigmoid(gate));
}

// ---------------------------------------------------------------------------
// Network

namespace {

template <typename T>
using Features = std::array<Tensor<T>, 5>;

}  // namespace

template <typename T>
struct SigNet<T>::Impl {
  std::array<int, 5> ch{};
  std::vector<LayerTrace>* trace = nullptr;

  struct Enc {
    std::array<ConvBnRelu<T>, 10> layers;
  };
  std::vector<Enc> encoders;  // image, semantic, ccr, r_est, s_est (image only with no_priors)
  Enc final_r, final_s, final_edge;

  // Edge decoder.
  std::array<DeconvBnRelu<T>, 4> edge_up;
  ConvBnRelu<T> edge_fuse;
  Conv2d<T> edge_proj_half, edge_proj_quarter, edge_head;

  // Initial estimation decoders.
  std::array<DeconvBnRelu<T>, 4> r_up, s_up;
  ConvBnRelu<T> r_fuse, s_fuse;
  Conv2d<T> r_head, s_head, r_gate_proj;

  // Final correction.
  Conv2d<T> calib_in, calib_out;
  std::array<DeconvBnRelu<T>, 4> fr_up, fs_up;
  ConvBnRelu<T> fr_fuse, fs_fuse;
  Conv2d<T> fr_head, fs_head;

  void record(const std::string& name, const Tensor<T>& t) {
    if (trace) trace->push_back({name, t.shape()});
  }

  Enc make_encoder(ad::ParamStore<T>& store, const std::string& name, int in) {
    Enc e;
    int prev = in;
    for (int stage = 0; stage < 5; ++stage) {
      const std::string base = name + ".stage" + std::to_string(stage + 1);
      if (stage == 0) {
        e.layers[0] = ConvBnRelu<T>(store, base + ".conv1", prev, ch[0], 1);
        e.layers[1] = ConvBnRelu<T>(store, base + ".conv2", ch[0], ch[0], 1);
      } else {
        e.layers[2 * stage] = ConvBnRelu<T>(store, base + ".down", prev, prev, 2);
        e.layers[2 * stage + 1] = ConvBnRelu<T>(store, base + ".conv", prev, ch[stage], 1);
      }
      prev = ch[stage];
    }
    return e;
  }

  Features<T> encode(const Enc& e, const std::string& name, const Tensor<T>& x, Mode mode) {
    Features<T> f;
    Tensor<T> h = x;
    for (int stage = 0; stage < 5; ++stage) {
      h = e.layers[2 * stage](h, mode);
      h = e.layers[2 * stage + 1](h, mode);
      f[stage] = h;
      record(name + ".f" + std::to_string(stage + 1), h);
    }
    return f;
  }
};

template <typename T>
SigNet<T>::SigNet(const ModelConfig& cfg)
    : cfg_(cfg), store_(std::make_unique<ad::ParamStore<T>>(cfg.seed)), impl_(std::make_unique<Impl>()) {
  cfg_.validate();
  Impl& m = *impl_;
  const int w = cfg_.base_width;
  m.ch = {w, 2 * w, 4 * w, 8 * w, 8 * w};
  const auto& c = m.ch;
  auto& st = *store_;
  const Ablation& ab = cfg_.ablation;

  // Global encoders.
  m.encoders.push_back(m.make_encoder(st, "enc_image", 3));
  if (!ab.no_priors) {
    m.encoders.push_back(m.make_encoder(st, "enc_semantic", kSemanticChannels));
    m.encoders.push_back(m.make_encoder(st, "enc_ccr", ab.image_edges ? 1 : kCcrChannels));
    m.encoders.push_back(m.make_encoder(st, "enc_r_est", 3));
    m.encoders.push_back(m.make_encoder(st, "enc_s_est", 1));
  }

  // Reflectance edge decoder: bottleneck concat(F_I, F_S, F_G); skips F_I, F_Rest, F_G.
  if (!ab.no_edge_module) {
    m.edge_up[0] = DeconvBnRelu<T>(st, "edge.up1", 3 * c[4], c[3]);
    m.edge_up[1] = DeconvBnRelu<T>(st, "edge.up2", c[3] + 3 * c[3], c[3]);
    m.edge_up[2] = DeconvBnRelu<T>(st, "edge.up3", c[3] + 3 * c[2], c[2]);
    m.edge_up[3] = DeconvBnRelu<T>(st, "edge.up4", c[2] + 3 * c[1], c[1]);
    m.edge_fuse = ConvBnRelu<T>(st, "edge.fuse", c[1] + 3 * c[0], c[0], 1);
    m.edge_proj_half = Conv2d<T>(st, "edge.proj_half", c[2], c[0], 1, 1, 0, true);
    m.edge_proj_quarter = Conv2d<T>(st, "edge.proj_quarter", c[3], c[0], 1, 1, 0, true);
    m.edge_head = Conv2d<T>(st, "edge.head", c[0], 1, 3, 1, 1, true);
  }

  // Initial estimation: joint decoders, each stage also sees the other branch.
  m.r_up[0] = DeconvBnRelu<T>(st, "init_r.up1", 3 * c[4], c[3]);
  m.s_up[0] = DeconvBnRelu<T>(st, "init_s.up1", 2 * c[4], c[3]);
  m.r_up[1] = DeconvBnRelu<T>(st, "init_r.up2", 2 * c[3] + 3 * c[3], c[3]);
  m.s_up[1] = DeconvBnRelu<T>(st, "init_s.up2", 2 * c[3] + 2 * c[3], c[3]);
  m.r_up[2] = DeconvBnRelu<T>(st, "init_r.up3", 2 * c[3] + 3 * c[2], c[2]);
  m.s_up[2] = DeconvBnRelu<T>(st, "init_s.up3", 2 * c[3] + 2 * c[2], c[2]);
  m.r_up[3] = DeconvBnRelu<T>(st, "init_r.up4", 2 * c[2] + 3 * c[1], c[1]);
  m.s_up[3] = DeconvBnRelu<T>(st, "init_s.up4", 2 * c[2] + 2 * c[1], c[1]);
  m.r_fuse = ConvBnRelu<T>(st, "init_r.fuse", 2 * c[1] + 3 * c[0], c[0], 1);
  m.s_fuse = ConvBnRelu<T>(st, "init_s.fuse", 2 * c[1] + 2 * c[0], c[0], 1);
  m.r_head = Conv2d<T>(st, "init_r.head", c[0], 3, 3, 1, 1, true);
  m.s_head = Conv2d<T>(st, "init_s.head", c[0], 1, 3, 1, 1, true);
  if (!ab.no_edge_module) m.r_gate_proj = Conv2d<T>(st, "init_r.gate_proj", 1, 3, 1, 1, 0, true);

  // Final correction: calibrator, encoders, joint decoders with attention-gated skips.
  m.calib_in = Conv2d<T>(st, "final.calib.in", 4, 16, 1, 1, 0, true);
  m.calib_out = Conv2d<T>(st, "final.calib.out", 16, 4, 1, 1, 0, true);
  m.final_r = m.make_encoder(st, "enc_final_r", 4);
  m.final_s = m.make_encoder(st, "enc_final_s", 1);
  if (!ab.no_edge_module) m.final_edge = m.make_encoder(st, "enc_final_edge", 1);
  m.fr_up[0] = DeconvBnRelu<T>(st, "final_r.up1", c[4], c[3]);
  m.fs_up[0] = DeconvBnRelu<T>(st, "final_s.up1", c[4], c[3]);
  m.fr_up[1] = DeconvBnRelu<T>(st, "final_r.up2", 2 * c[3] + 2 * c[3], c[3]);
  m.fs_up[1] = DeconvBnRelu<T>(st, "final_s.up2", 2 * c[3] + 2 * c[3], c[3]);
  m.fr_up[2] = DeconvBnRelu<T>(st, "final_r.up3", 2 * c[3] + 2 * c[2], c[2]);
  m.fs_up[2] = DeconvBnRelu<T>(st, "final_s.up3", 2 * c[3] + 2 * c[2], c[2]);
  m.fr_up[3] = DeconvBnRelu<T>(st, "final_r.up4", 2 * c[2] + 2 * c[1], c[1]);
  m.fs_up[3] = DeconvBnRelu<T>(st, "final_s.up4", 2 * c[2] + 2 * c[1], c[1]);
  m.fr_fuse = ConvBnRelu<T>(st, "final_r.fuse", 2 * c[1] + 2 * c[0], c[0], 1);
  m.fs_fuse = ConvBnRelu<T>(st, "final_s.fuse", 2 * c[1] + 2 * c[0], c[0], 1);
  m.fr_head = Conv2d<T>(st, "final_r.head", c[0], 3, 3, 1, 1, true);
  m.fs_head = Conv2d<T>(st, "final_s.head", c[0], 1, 3, 1, 1, true);
}

template <typename T>
SigNet<T>::~SigNet() = default;
template <typename T>
SigNet<T>::SigNet(SigNet&&) noexcept = default;
template <typename T>
SigNet<T>& SigNet<T>::operator=(SigNet&&) noexcept = default;

template <typename T>
int SigNet<T>::input_encoder_count() const {
  return static_cast<int>(impl_->encoders.size());
}

template <typename T>
int SigNet<T>::ccr_input_channels() const {
  return cfg_.ablation.image_edges ? 1 : kCcrChannels;
}

template <typename T>
std::vector<ad::Conv2d<T>*> SigNet<T>::heads() {
  Impl& m = *impl_;
  std::vector<ad::Conv2d<T>*> out{&m.r_head, &m.s_head, &m.fr_head, &m.fs_head};
  if (!cfg_.ablation.no_edge_module) out.insert(out.begin(), &m.edge_head);
  return out;
}

template <typename T>
ForwardOutputs<T> SigNet<T>::forward(const NetInputs<T>& in, Mode mode, std::vector<LayerTrace>* trace) {
  using ad::concat;
  Impl& m = *impl_;
  m.trace = trace;
  const Ablation& ab = cfg_.ablation;
  const Shape is = in.image.shape();
  if (is.h != cfg_.input_size || is.w != cfg_.input_size || is.c != 3) {
    throw Error(ErrorCode::SizeMismatch, "forward: expected N x 3 x " + std::to_string(cfg_.input_size) +
                                             " x " + std::to_string(cfg_.input_size) + " image, got " +
                                             is.str());
  }
  const int n = is.n, size = cfg_.input_size;

  // Global encoders.
  const Features<T> fi = m.encode(m.encoders[0], "enc_image", in.image, mode);
  Features<T> fs = fi, fg = fi, frest = fi, fsest = fi;
  if (!ab.no_priors) {
    fs = m.encode(m.encoders[1], "enc_semantic", in.semantic, mode);
    fg = m.encode(m.encoders[2], "enc_ccr", in.ccr, mode);
    frest = m.encode(m.encoders[3], "enc_r_est", in.r_est, mode);
    fsest = m.encode(m.encoders[4], "enc_s_est", in.s_est, mode);
  }

  ForwardOutputs<T> out;
  // Edge decoder features at H/8, H/4, H/2, H; empty without the edge module.
  std::array<Tensor<T>, 4> edge_feat;
  if (!ab.no_edge_module) {
    Tensor<T> d = m.edge_up[0](concat<T>({fi[4], fs[4], fg[4]}), mode);
    edge_feat[0] = d;
    for (int k = 1; k < 4; ++k) {
      const int skip = 4 - k;
      d = m.edge_up[k](concat<T>({d, fi[skip], frest[skip], fg[skip]}), mode);
      edge_feat[k] = d;
    }
    for (int k = 0; k < 4; ++k) m.record("edge.up" + std::to_string(k + 1), edge_feat[k]);
    const Tensor<T> fused = m.edge_fuse(concat<T>({d, fi[0], frest[0], fg[0]}), mode);
    m.record("edge.fuse", fused);
    out.edge_full = ad::sigmoid(m.edge_head(fused));
    out.edge_half = ad::sigmoid(m.edge_head(m.edge_proj_half(edge_feat[2])));
    out.edge_quarter = ad::sigmoid(m.edge_head(m.edge_proj_quarter(edge_feat[1])));
  } else {
    out.edge_full = Tensor<T>::zeros(Shape{n, 1, size, size});
    out.edge_half = Tensor<T>::zeros(Shape{n, 1, size / 2, size / 2});
    out.edge_quarter = Tensor<T>::zeros(Shape{n, 1, size / 4, size / 4});
  }
  m.record("out.edge_full", out.edge_full);
  m.record("out.edge_half", out.edge_half);
  m.record("out.edge_quarter", out.edge_quarter);

  auto gate = [&](int k, const Tensor<T>& x) {
    return attention(ab.no_edge_module ? x : edge_feat[k], x);
  };

  // Initial estimation.
  Tensor<T> r = gate(0, m.r_up[0](concat<T>({fi[4], frest[4], fs[4]}), mode));
  Tensor<T> s = gate(0, m.s_up[0](concat<T>({fi[4], fsest[4]}), mode));
  m.record("init_r.up1", r);
  m.record("init_s.up1", s);
  for (int k = 1; k < 4; ++k) {
    const int skip = 4 - k;
    const Tensor<T> r_next = m.r_up[k](concat<T>({r, s, fi[skip], frest[skip], fs[skip]}), mode);
    const Tensor<T> s_next = m.s_up[k](concat<T>({s, r, fi[skip], fsest[skip]}), mode);
    r = gate(k, r_next);
    s = gate(k, s_next);
    m.record("init_r.up" + std::to_string(k + 1), r);
    m.record("init_s.up" + std::to_string(k + 1), s);
  }
  const Tensor<T> r5 = m.r_fuse(concat<T>({r, s, fi[0], frest[0], fs[0]}), mode);
  const Tensor<T> s5 = m.s_fuse(concat<T>({s, r, fi[0], fsest[0]}), mode);
  m.record("init_r.fuse", r5);
  m.record("init_s.fuse", s5);
  const Tensor<T> r_logit = m.r_head(r5);
  const Tensor<T> s_logit = m.s_head(s5);
  if (ab.no_edge_module) {
    out.r_initial = ad::sigmoid(attention(r_logit, r_logit));
    out.s_initial = ad::relu(attention(s_logit, s_logit));
  } else {
    out.r_initial = ad::sigmoid(attention(m.r_gate_proj(out.edge_full), r_logit));
    out.s_initial = ad::relu(attention(out.edge_full, s_logit));
  }
  m.record("out.r_initial", out.r_initial);
  m.record("out.s_initial", out.s_initial);

  // Final correction.
  const Tensor<T> calib_src = concat<T>({out.edge_full, out.r_initial});
  const Tensor<T> calibrated = m.calib_out(ad::relu(m.calib_in(calib_src)));
  m.record("final.calib", calibrated);
  const Features<T> fr1 = m.encode(m.final_r, "enc_final_r", calibrated, mode);
  const Features<T> fs1 = m.encode(m.final_s, "enc_final_s", out.s_initial, mode);
  Features<T> att;
  if (!ab.no_edge_module) {
    const Features<T> fre = m.encode(m.final_edge, "enc_final_edge", out.edge_full, mode);
    for (int k = 0; k < 5; ++k) att[k] = attention(fre[k], fr1[k]);
  } else {
    for (int k = 0; k < 5; ++k) att[k] = attention(fr1[k], fr1[k]);
  }
  Tensor<T> fr = m.fr_up[0](att[4], mode);
  Tensor<T> fsd = m.fs_up[0](fs1[4], mode);
  m.record("final_r.up1", fr);
  m.record("final_s.up1", fsd);
  for (int k = 1; k < 4; ++k) {
    const int skip = 4 - k;
    const Tensor<T> fr_next = m.fr_up[k](concat<T>({fr, fsd, fr1[skip], att[skip]}), mode);
    const Tensor<T> fs_next = m.fs_up[k](concat<T>({fsd, fr, fs1[skip], att[skip]}), mode);
    fr = fr_next;
    fsd = fs_next;
    m.record("final_r.up" + std::to_string(k + 1), fr);
    m.record("final_s.up" + std::to_string(k + 1), fsd);
  }
  const Tensor<T> fr5 = m.fr_fuse(concat<T>({fr, fsd, fr1[0], att[0]}), mode);
  const Tensor<T> fs5 = m.fs_fuse(concat<T>({fsd, fr, fs1[0], att[0]}), mode);
  m.record("final_r.fuse", fr5);
  m.record("final_s.fuse", fs5);
  out.r_final = ad::sigmoid(m.fr_head(fr5));
  out.s_final = ad::relu(m.fs_head(fs5));
  m.record("out.r_final", out.r_final);
  m.record("out.s_final", out.s_final);
  m.trace = nullptr;
  return out;
}

namespace {

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

template <typename T>
nlohmann::json SigNet<T>::architecture_report() {
  const int size = cfg_.input_size;
  InputTensors zero;
  zero.image = Tensor<float>::zeros(Shape{1, 3, size, size});
  zero.semantic = Tensor<float>::zeros(Shape{1, kSemanticChannels, size, size});
  zero.ccr = Tensor<float>::zeros(Shape{1, ccr_input_channels(), size, size});
  zero.r_est = Tensor<float>::zeros(Shape{1, 3, size, size});
  zero.s_est = Tensor<float>::zeros(Shape{1, 1, size, size});
  const InputTensors* items[] = {&zero};
  std::vector<LayerTrace> trace;
  {
    ad::NoGradGuard guard;
    forward(stack_inputs<T>(items), Mode::Eval, &trace);
  }
  nlohmann::ordered_json report;
  nlohmann::json cfg = to_json(cfg_);
  cfg.erase("seed");
  report["config"] = cfg;
  report["input_encoders"] = input_encoder_count();
  report["parameter_count"] = parameter_count();
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (const auto& p : store_->param_list()) {
    const Shape& s = p.tensor.shape();
    params.push_back({{"name", p.name}, {"shape", {s.n, s.c, s.h, s.w}}, {"count", s.numel()}});
  }
  report["parameters"] = std::move(params);
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const LayerTrace& t : trace) {
    layers.push_back({{"name", t.name}, {"output", {t.output.c, t.output.h, t.output.w}}});
  }
  report["layers"] = std::move(layers);
  return nlohmann::json(report);
}

template <typename T>
std::string SigNet<T>::architecture_hash() {
  const nlohmann::json report = architecture_report();
  return fnv1a_hex(report.dump());
}

template Tensor<float> attention(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> attention(const Tensor<double>&, const Tensor<double>&);
template NetInputs<float> stack_inputs(std::span<const InputTensors* const>);
template NetInputs<double> stack_inputs(std::span<const InputTensors* const>);
template class SigNet<float>;
template class SigNet<double>;

}  // namespace iid::net
