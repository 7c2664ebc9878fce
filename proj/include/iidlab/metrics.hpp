#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <vector>

#include "iidlab/image.hpp"

namespace iid::metrics {

/// Plain mean squared error over all samples.
template <int C>
double mse(const Raster<C>& pred, const Raster<C>& gt);

/// min over a scalar a of mean((a pred - gt)^2), a = <pred,gt>/<pred,pred> (0 if pred is 0).
template <int C>
double si_mse(const Raster<C>& pred, const Raster<C>& gt);

/// The optimal scale used by si_mse.
template <int C>
double si_scale(const Raster<C>& pred, const Raster<C>& gt);

/// Default LMSE window: max(8, min(h, w) / 4).
int default_lmse_window(int h, int w);

/// Local scale-invariant error over half-overlapping window x window tiles, normalised
/// by ground-truth energy; channels averaged. window 0 selects the default.
/// Throws WindowLargerThanImage.
template <int C>
double lmse(const Raster<C>& pred, const Raster<C>& gt, int window = 0);

/// (1 - SSIM) / 2 with an 11x11 Gaussian window (sigma 1.5), weights renormalised at
/// the border, K1 = 0.01, K2 = 0.03, range 1; SSIM averaged over channels and pixels.
template <int C>
double dssim_metric(const Raster<C>& pred, const Raster<C>& gt);

enum class Darker { Point1, Point2, Equal };

struct Judgment {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  Darker darker = Darker::Equal;
  double weight = 1.0;
};

struct JudgmentSet {
  std::vector<Judgment> judgments;

  /// {"judgments": [{"x1", "y1", "x2", "y2", "darker": "1"|"2"|"E", "weight"}]}.
  /// BadInput on malformed entries or negative/non-finite weights.
  static JudgmentSet from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

JudgmentSet load_judgments(const std::filesystem::path& path);

inline constexpr double kWhdrDelta = 0.1;

/// Relation predicted from the luminance ratio of two points.
Darker predict_relation(double l1, double l2, double delta = kWhdrDelta);

/// Luminance 0.299 R + 0.587 G + 0.114 B averaged over the in-bounds 3x3 patch.
double patch_luminance(const ImageRGB& img, int x, int y);

/// Weighted fraction of judgments the reflectance contradicts.
/// EmptyJudgments; ZeroTotalWeight; BadInput for points outside the image.
double whdr(const ImageRGB& reflectance, const JudgmentSet& judgments, double delta = kWhdrDelta);

struct MetricReport {
  double mse_r = 0, si_mse_r = 0, lmse_r = 0, dssim_r = 0;
  double mse_s = 0, si_mse_s = 0, lmse_s = 0, dssim_s = 0;
  std::optional<double> whdr;

  nlohmann::ordered_json to_json() const;
};

MetricReport score(const ImageRGB& r_pred, const GrayImage& s_pred, const ImageRGB& r_gt,
                   const GrayImage& s_gt);

/// Unweighted mean, in the given order.
MetricReport mean_report(const std::vector<MetricReport>& reports);

}  // namespace iid::metrics
