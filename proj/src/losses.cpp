#include "iidlab/losses.hpp"

#include "iidlab/ops.hpp"

namespace iid::loss {

using namespace iid::ad;

void LossWeights::validate() const {
  for (double v : {lambda_e, lambda_i, lambda_p, lambda_dssim}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::InvalidConfig, "loss: weights must be finite and >= 0");
    }
  }
}

nlohmann::json to_json(const LossWeights& w) {
  return {{"lambda_e", w.lambda_e},
          {"lambda_i", w.lambda_i},
          {"lambda_p", w.lambda_p},
          {"lambda_dssim", w.lambda_dssim}};
}

LossWeights loss_weights_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "loss: expected an object");
  LossWeights w;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "lambda_e") w.lambda_e = v.get<double>();
      else if (key == "lambda_i") w.lambda_i = v.get<double>();
      else if (key == "lambda_p") w.lambda_p = v.get<double>();
      else if (key == "lambda_dssim") w.lambda_dssim = v.get<double>();
      else throw Error(ErrorCode::InvalidConfig, "loss: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("loss: ") + e.what());
  }
  w.validate();
  return w;
}

LossReport total_loss(LossReport p, const LossWeights& w) {
  p.total = w.lambda_e * p.l_e + w.lambda_i * p.l_i + p.l_f + p.l_norm + p.l_tv +
            w.lambda_dssim * p.l_dssim;
  return p;
}

SegmentBatch SegmentBatch::from(std::span<const SegmentMap* const> maps) {
  SegmentBatch b;
  if (maps.empty()) return b;
  b.n = static_cast<int>(maps.size());
  b.h = maps.front()->height();
  b.w = maps.front()->width();
  for (const SegmentMap* m : maps) {
    if (m->height() != b.h || m->width() != b.w) {
      throw Error(ErrorCode::SizeMismatch, "SegmentBatch: segment maps differ in size");
    }
    b.segment_counts.push_back(m->segment_count());
    for (int y = 0; y < b.h; ++y) {
      for (int x = 0; x < b.w; ++x) {
        b.labels.push_back(m->label(y, x));
        const SemanticClass c = m->class_at(y, x);
        b.homogeneous.push_back(c == SemanticClass::Wall || c == SemanticClass::Ceiling);
      }
    }
  }
  return b;
}

namespace {

template <typename T, int C>
void append_planar(const Raster<C>& img, std::vector<T>& out) {
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) out.push_back(static_cast<T>(img.at(y, x, c)));
    }
  }
}

template <typename T, int C, typename Get>
Tensor<T> stack(std::size_t n, Get get) {
  std::vector<T> data;
  const Raster<C>& first = get(0);
  for (std::size_t i = 0; i < n; ++i) {
    const Raster<C>& img = get(i);
    if (!img.same_size(first)) throw Error(ErrorCode::SizeMismatch, "make_targets: mixed image sizes");
    append_planar<T>(img, data);
  }
  return Tensor<T>::from(Shape{static_cast<int>(n), C, first.height(), first.width()}, std::move(data));
}

void check_segments(const SegmentBatch& seg, const Shape& s) {
  if (seg.n != s.n || seg.h != s.h || seg.w != s.w) {
    throw Error(ErrorCode::ShapeMismatch, "segment batch does not match prediction " + s.str());
  }
}

template <typename T>
Tensor<T> normalized(const Tensor<T>& x, T eps) {
  return div(x, broadcast_channels(clamp_min(channel_sum(x), eps), x.shape().c));
}

}  // namespace

template <typename T>
Targets<T> make_targets(std::span<const IntrinsicSample* const> samples,
                        std::span<const priors::EdgePyramid* const> edges) {
  if (samples.empty() || samples.size() != edges.size()) {
    throw Error(ErrorCode::BadInput, "make_targets: need one edge pyramid per sample");
  }
  const std::size_t n = samples.size();
  Targets<T> t;
  t.image = stack<T, 3>(n, [&](std::size_t i) -> const ImageRGB& { return samples[i]->image; });
  t.reflectance = stack<T, 3>(n, [&](std::size_t i) -> const ImageRGB& { return samples[i]->reflectance; });
  t.shading = stack<T, 1>(n, [&](std::size_t i) -> const GrayImage& { return samples[i]->shading; });
  t.edge_full = stack<T, 1>(n, [&](std::size_t i) -> const GrayImage& { return edges[i]->full; });
  t.edge_half = stack<T, 1>(n, [&](std::size_t i) -> const GrayImage& { return edges[i]->half; });
  t.edge_quarter = stack<T, 1>(n, [&](std::size_t i) -> const GrayImage& { return edges[i]->quarter; });
  std::vector<const SegmentMap*> maps;
  for (const IntrinsicSample* s : samples) maps.push_back(&s->segments);
  t.segments = SegmentBatch::from(maps);
  return t;
}

template <typename T>
Tensor<T> edge_loss(const net::ForwardOutputs<T>& out, const Targets<T>& gt) {
  return add(add(mse(out.edge_full, gt.edge_full), mse(out.edge_half, gt.edge_half)),
             mse(out.edge_quarter, gt.edge_quarter));
}

template <typename T>
Tensor<T> initial_loss(const Tensor<T>& r, const Tensor<T>& s, const Tensor<T>& gt_r, const Tensor<T>& gt_s) {
  return add(mse(r, gt_r), mse(s, gt_s));
}

template <typename T>
Tensor<T> final_loss(const Tensor<T>& r, const Tensor<T>& s, const Tensor<T>& gt_r, const Tensor<T>& gt_s,
                     const Tensor<T>& image) {
  const Tensor<T> recon = mul(r, broadcast_channels(s, r.shape().c));
  return add(add(mse(r, gt_r), mse(s, gt_s)), mse(recon, image));
}

template <typename T>
Tensor<T> norm_invariance_loss(const Tensor<T>& r, const Tensor<T>& image, const SegmentBatch& seg, T eps) {
  const Shape s = r.shape();
  if (!(s == image.shape())) {
    throw Error(ErrorCode::ShapeMismatch, "norm_invariance_loss: " + s.str() + " vs " + image.shape().str());
  }
  check_segments(seg, s);
  const std::size_t plane = s.plane();
  // Weight 1 / (C |segment| N) turns the weighted sum into a per-segment mean,
  // summed over segments and averaged over the batch.
  std::vector<T> weight(s.numel());
  for (int n = 0; n < s.n; ++n) {
    const int* labels = seg.labels.data() + n * plane;
    std::vector<std::size_t> sizes(seg.segment_counts[n], 0);
    for (std::size_t i = 0; i < plane; ++i) ++sizes[labels[i]];
    for (int c = 0; c < s.c; ++c) {
      for (std::size_t i = 0; i < plane; ++i) {
        weight[(static_cast<std::size_t>(n) * s.c + c) * plane + i] =
            static_cast<T>(1.0 / (static_cast<double>(s.c) * sizes[labels[i]] * s.n));
      }
    }
  }
  const Tensor<T> diff = sub(normalized(r, eps), normalized(image, eps));
  return sum(mul(square(diff), Tensor<T>::from(s, std::move(weight))));
}

template <typename T>
Tensor<T> total_variation(const Tensor<T>& x, const SegmentBatch& seg) {
  const Shape s = x.shape();
  check_segments(seg, s);
  const std::size_t plane = s.plane();
  std::vector<T> mx(s.numel(), T(0)), my(s.numel(), T(0));
  for (int n = 0; n < s.n; ++n) {
    const int* labels = seg.labels.data() + n * plane;
    const std::uint8_t* hom = seg.homogeneous.data() + n * plane;
    for (int y = 0; y < s.h; ++y) {
      for (int xx = 0; xx < s.w; ++xx) {
        const std::size_t i = static_cast<std::size_t>(y) * s.w + xx;
        if (!hom[i]) continue;
        const bool right = xx + 1 < s.w && hom[i + 1] && labels[i + 1] == labels[i];
        const bool down = y + 1 < s.h && hom[i + s.w] && labels[i + s.w] == labels[i];
        for (int c = 0; c < s.c; ++c) {
          const std::size_t k = (static_cast<std::size_t>(n) * s.c + c) * plane + i;
          mx[k] = right ? T(1) : T(0);
          my[k] = down ? T(1) : T(0);
        }
      }
    }
  }
  return add(mul(ad::abs(shift_diff(x, Axis::X)), Tensor<T>::from(s, std::move(mx))),
             mul(ad::abs(shift_diff(x, Axis::Y)), Tensor<T>::from(s, std::move(my))));
}

template <typename T>
Tensor<T> tv_loss(const Tensor<T>& r, const Tensor<T>& gt_r, const SegmentBatch& seg) {
  const Shape s = r.shape();
  if (!(s == gt_r.shape())) {
    throw Error(ErrorCode::ShapeMismatch, "tv_loss: " + s.str() + " vs " + gt_r.shape().str());
  }
  check_segments(seg, s);
  const std::size_t plane = s.plane();
  std::size_t count = 0;
  for (std::uint8_t h : seg.homogeneous) count += h;
  if (count == 0) return Tensor<T>::scalar(T(0));
  const T w = static_cast<T>(1.0 / (static_cast<double>(count) * s.c));
  std::vector<T> weight(s.numel(), T(0));
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (std::size_t i = 0; i < plane; ++i) {
        if (seg.homogeneous[n * plane + i]) weight[(static_cast<std::size_t>(n) * s.c + c) * plane + i] = w;
      }
    }
  }
  const Tensor<T> diff = sub(total_variation(r, seg), total_variation(gt_r, seg));
  return sum(mul(square(diff), Tensor<T>::from(s, std::move(weight))));
}

template <typename T>
Tensor<T> ssim(const Tensor<T>& x, const Tensor<T>& y) {
  if (!(x.shape() == y.shape())) {
    throw Error(ErrorCode::ShapeMismatch, "ssim: " + x.shape().str() + " vs " + y.shape().str());
  }
  auto blur = [](const Tensor<T>& t) { return gaussian_blur(t, kSsimSigma, kSsimRadius); };
  const Tensor<T> mu_x = blur(x), mu_y = blur(y);
  const Tensor<T> mu_xx = mul(mu_x, mu_x), mu_yy = mul(mu_y, mu_y), mu_xy = mul(mu_x, mu_y);
  const Tensor<T> var_x = sub(blur(mul(x, x)), mu_xx);
  const Tensor<T> var_y = sub(blur(mul(y, y)), mu_yy);
  const Tensor<T> cov = sub(blur(mul(x, y)), mu_xy);
  const T c1 = static_cast<T>(kSsimC1), c2 = static_cast<T>(kSsimC2);
  const Tensor<T> num = mul(add_scalar(scale(mu_xy, T(2)), c1), add_scalar(scale(cov, T(2)), c2));
  const Tensor<T> den = mul(add_scalar(add(mu_xx, mu_yy), c1), add_scalar(add(var_x, var_y), c2));
  return mean(div(num, den));
}

template <typename T>
Tensor<T> dssim_loss(const Tensor<T>& x, const Tensor<T>& y) {
  return scale(add_scalar(scale(ssim(x, y), T(-1)), T(1)), T(0.5));
}

template <typename T>
LossReport LossTerms<T>::report() const {
  return LossReport{static_cast<double>(l_e.item()),    static_cast<double>(l_i.item()),
                    static_cast<double>(l_f.item()),    static_cast<double>(l_norm.item()),
                    static_cast<double>(l_tv.item()),   static_cast<double>(l_dssim.item()),
                    static_cast<double>(total.item())};
}

template <typename T>
LossTerms<T> compute_losses(const net::ForwardOutputs<T>& out, const Targets<T>& gt, const LossWeights& w,
                            bool with_edges) {
  LossTerms<T> t;
  t.l_e = with_edges ? edge_loss(out, gt) : Tensor<T>::scalar(T(0));
  t.l_i = initial_loss(out.r_initial, out.s_initial, gt.reflectance, gt.shading);
  t.l_f = final_loss(out.r_final, out.s_final, gt.reflectance, gt.shading, gt.image);
  t.l_norm = norm_invariance_loss(out.r_final, gt.image, gt.segments);
  t.l_tv = tv_loss(out.r_final, gt.reflectance, gt.segments);
  t.l_dssim = add(dssim_loss(out.r_final, gt.reflectance), dssim_loss(out.s_final, gt.shading));
  t.total = add(add(add(scale(t.l_e, static_cast<T>(w.lambda_e)), scale(t.l_i, static_cast<T>(w.lambda_i))),
                    add(t.l_f, t.l_norm)),
                add(t.l_tv, scale(t.l_dssim, static_cast<T>(w.lambda_dssim))));
  return t;
}

#define IID_INSTANTIATE_LOSSES(T)                                                                       \
  template Targets<T> make_targets(std::span<const IntrinsicSample* const>,                             \
                                   std::span<const priors::EdgePyramid* const>);                        \
  template Tensor<T> edge_loss(const net::ForwardOutputs<T>&, const Targets<T>&);                       \
  template Tensor<T> initial_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> final_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                const Tensor<T>&);                                                      \
  template Tensor<T> norm_invariance_loss(const Tensor<T>&, const Tensor<T>&, const SegmentBatch&, T);  \
  template Tensor<T> total_variation(const Tensor<T>&, const SegmentBatch&);                            \
  template Tensor<T> tv_loss(const Tensor<T>&, const Tensor<T>&, const SegmentBatch&);                  \
  template Tensor<T> ssim(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> dssim_loss(const Tensor<T>&, const Tensor<T>&);                                    \
  template struct LossTerms<T>;                                                                         \
  template LossTerms<T> compute_losses(const net::ForwardOutputs<T>&, const Targets<T>&,                \
                                       const LossWeights&, bool);

IID_INSTANTIATE_LOSSES(float)
IID_INSTANTIATE_LOSSES(double)

}  // namespace iid::loss
