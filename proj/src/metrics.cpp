#include "iidlab/metrics.hpp"

#include <cmath>
#include <fstream>

#include "iidlab/error.hpp"

namespace iid::metrics {

namespace {

template <int C>
void check_same(const Raster<C>& a, const Raster<C>& b, const char* what) {
  if (!a.same_size(b)) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": prediction and ground truth differ in size");
  }
}

}  // namespace

template <int C>
double mse(const Raster<C>& pred, const Raster<C>& gt) {
  check_same(pred, gt, "mse");
  const auto p = pred.data(), g = gt.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - g[i];
    acc += d * d;
  }
  return p.empty() ? 0.0 : acc / static_cast<double>(p.size());
}

template <int C>
double si_scale(const Raster<C>& pred, const Raster<C>& gt) {
  check_same(pred, gt, "si_mse");
  const auto p = pred.data(), g = gt.data();
  double pg = 0.0, pp = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pg += static_cast<double>(p[i]) * g[i];
    pp += static_cast<double>(p[i]) * p[i];
  }
  return pp > 0.0 ? pg / pp : 0.0;
}

template <int C>
double si_mse(const Raster<C>& pred, const Raster<C>& gt) {
  const double a = si_scale(pred, gt);
  const auto p = pred.data(), g = gt.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = a * p[i] - g[i];
    acc += d * d;
  }
  return p.empty() ? 0.0 : acc / static_cast<double>(p.size());
}

int default_lmse_window(int h, int w) { return std::max(8, std::min(h, w) / 4); }

template <int C>
double lmse(const Raster<C>& pred, const Raster<C>& gt, int window) {
  check_same(pred, gt, "lmse");
  const int h = gt.height(), w = gt.width();
  const int k = window > 0 ? window : default_lmse_window(h, w);
  if (k > h || k > w) {
    throw Error(ErrorCode::WindowLargerThanImage, "lmse: window " + std::to_string(k) + " exceeds image " +
                                                      std::to_string(h) + "x" + std::to_string(w));
  }
  const int stride = std::max(1, k / 2);
  double total = 0.0;
  for (int c = 0; c < C; ++c) {
    double err = 0.0, energy = 0.0;
    for (int y0 = 0; y0 + k <= h; y0 += stride) {
      for (int x0 = 0; x0 + k <= w; x0 += stride) {
        double pg = 0.0, pp = 0.0, gg = 0.0;
        for (int y = y0; y < y0 + k; ++y) {
          for (int x = x0; x < x0 + k; ++x) {
            const double p = pred.at(y, x, c), g = gt.at(y, x, c);
            pg += p * g;
            pp += p * p;
            gg += g * g;
          }
        }
        const double a = pp > 0.0 ? pg / pp : 0.0;
        double e = 0.0;
        for (int y = y0; y < y0 + k; ++y) {
          for (int x = x0; x < x0 + k; ++x) {
            const double d = a * pred.at(y, x, c) - gt.at(y, x, c);
            e += d * d;
          }
        }
        err += e;
        energy += gg;
      }
    }
    total += energy > 0.0 ? err / energy : 0.0;
  }
  return total / C;
}

template <int C>
double dssim_metric(const Raster<C>& pred, const Raster<C>& gt) {
  check_same(pred, gt, "dssim");
  constexpr int r = 5;
  constexpr double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double g[2 * r + 1];
  for (int i = -r; i <= r; ++i) g[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  const int h = gt.height(), w = gt.width();
  double acc = 0.0;
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double wsum = 0, mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
        for (int dy = -r; dy <= r; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= h) continue;
          for (int dx = -r; dx <= r; ++dx) {
            const int xx = x + dx;
            if (xx < 0 || xx >= w) continue;
            const double k = g[dy + r] * g[dx + r];
            const double a = pred.at(yy, xx, c), b = gt.at(yy, xx, c);
            wsum += k;
            mx += k * a;
            my += k * b;
            mxx += k * a * a;
            myy += k * b * b;
            mxy += k * a * b;
          }
        }
        mx /= wsum;
        my /= wsum;
        const double vx = mxx / wsum - mx * mx;
        const double vy = myy / wsum - my * my;
        const double cov = mxy / wsum - mx * my;
        acc += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    }
  }
  const double ssim = acc / (static_cast<double>(C) * h * w);
  return (1.0 - ssim) / 2.0;
}

// ---------------------------------------------------------------------------
// WHDR

JudgmentSet JudgmentSet::from_json(const nlohmann::json& j) {
  JudgmentSet set;
  try {
    for (const auto& e : j.at("judgments")) {
      Judgment jd;
      jd.x1 = e.at("x1").get<int>();
      jd.y1 = e.at("y1").get<int>();
      jd.x2 = e.at("x2").get<int>();
      jd.y2 = e.at("y2").get<int>();
      const std::string d = e.at("darker").get<std::string>();
      if (d == "1") jd.darker = Darker::Point1;
      else if (d == "2") jd.darker = Darker::Point2;
      else if (d == "E" || d == "e") jd.darker = Darker::Equal;
      else throw Error(ErrorCode::BadInput, "judgments: darker must be \"1\", \"2\" or \"E\"");
      jd.weight = e.value("weight", 1.0);
      if (!std::isfinite(jd.weight) || jd.weight < 0.0) {
        throw Error(ErrorCode::BadInput, "judgments: weights must be finite and >= 0");
      }
      set.judgments.push_back(jd);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadInput, std::string("judgments: ") + e.what());
  }
  return set;
}

nlohmann::json JudgmentSet::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const Judgment& j : judgments) {
    const char* d = j.darker == Darker::Point1 ? "1" : j.darker == Darker::Point2 ? "2" : "E";
    arr.push_back({{"x1", j.x1}, {"y1", j.y1}, {"x2", j.x2}, {"y2", j.y2}, {"darker", d}, {"weight", j.weight}});
  }
  return {{"judgments", arr}};
}

JudgmentSet load_judgments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  try {
    return JudgmentSet::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::BadInput, path.string() + ": " + e.what());
  }
}

Darker predict_relation(double l1, double l2, double delta) {
  const double ratio = l1 / std::max(l2, 1e-6);
  if (ratio > 1.0 + delta) return Darker::Point2;
  if (ratio < 1.0 / (1.0 + delta)) return Darker::Point1;
  return Darker::Equal;
}

double patch_luminance(const ImageRGB& img, int x, int y) {
  double acc = 0.0;
  int n = 0;
  for (int yy = std::max(0, y - 1); yy <= std::min(img.height() - 1, y + 1); ++yy) {
    for (int xx = std::max(0, x - 1); xx <= std::min(img.width() - 1, x + 1); ++xx) {
      acc += 0.299 * img.at(yy, xx, 0) + 0.587 * img.at(yy, xx, 1) + 0.114 * img.at(yy, xx, 2);
      ++n;
    }
  }
  return acc / n;
}

double whdr(const ImageRGB& refl, const JudgmentSet& set, double delta) {
  if (set.judgments.empty()) throw Error(ErrorCode::EmptyJudgments, "whdr: no judgments");
  auto inside = [&](int x, int y) { return x >= 0 && y >= 0 && x < refl.width() && y < refl.height(); };
  double wrong = 0.0, total = 0.0;
  for (const Judgment& j : set.judgments) {
    if (!inside(j.x1, j.y1) || !inside(j.x2, j.y2)) {
      throw Error(ErrorCode::BadInput, "whdr: judgment point outside the image");
    }
    const Darker pred = predict_relation(patch_luminance(refl, j.x1, j.y1), patch_luminance(refl, j.x2, j.y2), delta);
    total += j.weight;
    if (pred != j.darker) wrong += j.weight;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroTotalWeight, "whdr: total judgment weight is zero");
  return wrong / total;
}

// ---------------------------------------------------------------------------
// Reports

nlohmann::ordered_json MetricReport::to_json() const {
  nlohmann::ordered_json j{{"mse_r", mse_r},     {"si_mse_r", si_mse_r}, {"lmse_r", lmse_r},
                           {"dssim_r", dssim_r}, {"mse_s", mse_s},       {"si_mse_s", si_mse_s},
                           {"lmse_s", lmse_s},   {"dssim_s", dssim_s}};
  if (whdr) j["whdr"] = *whdr;
  return j;
}

MetricReport score(const ImageRGB& r_pred, const GrayImage& s_pred, const ImageRGB& r_gt, const GrayImage& s_gt) {
  MetricReport m;
  m.mse_r = mse(r_pred, r_gt);
  m.si_mse_r = si_mse(r_pred, r_gt);
  m.lmse_r = lmse(r_pred, r_gt);
  m.dssim_r = dssim_metric(r_pred, r_gt);
  m.mse_s = mse(s_pred, s_gt);
  m.si_mse_s = si_mse(s_pred, s_gt);
  m.lmse_s = lmse(s_pred, s_gt);
  m.dssim_s = dssim_metric(s_pred, s_gt);
  return m;
}

MetricReport mean_report(const std::vector<MetricReport>& reports) {
  MetricReport m;
  if (reports.empty()) return m;
  double whdr_sum = 0.0;
  std::size_t whdr_count = 0;
  for (const MetricReport& r : reports) {
    m.mse_r += r.mse_r;
    m.si_mse_r += r.si_mse_r;
    m.lmse_r += r.lmse_r;
    m.dssim_r += r.dssim_r;
    m.mse_s += r.mse_s;
    m.si_mse_s += r.si_mse_s;
    m.lmse_s += r.lmse_s;
    m.dssim_s += r.dssim_s;
    if (r.whdr) {
      whdr_sum += *r.whdr;
      ++whdr_count;
    }
  }
  const double n = static_cast<double>(reports.size());
  for (double* v : {&m.mse_r, &m.si_mse_r, &m.lmse_r, &m.dssim_r, &m.mse_s, &m.si_mse_s, &m.lmse_s, &m.dssim_s}) {
    *v /= n;
  }
  if (whdr_count) m.whdr = whdr_sum / static_cast<double>(whdr_count);
  return m;
}

template double mse(const Raster<1>&, const Raster<1>&);
template double mse(const Raster<3>&, const Raster<3>&);
template double si_scale(const Raster<1>&, const Raster<1>&);
template double si_scale(const Raster<3>&, const Raster<3>&);
template double si_mse(const Raster<1>&, const Raster<1>&);
template double si_mse(const Raster<3>&, const Raster<3>&);
template double lmse(const Raster<1>&, const Raster<1>&, int);
template double lmse(const Raster<3>&, const Raster<3>&, int);
template double dssim_metric(const Raster<1>&, const Raster<1>&);
template double dssim_metric(const Raster<3>&, const Raster<3>&);

}  // namespace iid::metrics
