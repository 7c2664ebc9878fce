#include "iidlab/priors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

namespace iid::priors {

CcrMaps ccr_maps(const ImageRGB& img, float eps) {
  const int h = img.height(), w = img.width();
  CcrMaps out{{GrayImage(h, w), GrayImage(h, w), GrayImage(h, w)},
              {GrayImage(h, w), GrayImage(h, w), GrayImage(h, w)},
              GrayImage(h, w)};
  auto ch = [&](int y, int x, int c) { return std::max(img.at(y, x, c), eps); };
  auto fill = [&](DirectionalRatios& dst, int y, int x, int y2, int x2) {
    const float r1 = ch(y, x, 0), g1 = ch(y, x, 1), b1 = ch(y, x, 2);
    const float r2 = ch(y2, x2, 0), g2 = ch(y2, x2, 1), b2 = ch(y2, x2, 2);
    const float rg = (r1 * g2) / (r2 * g1);
    const float rb = (r1 * b2) / (r2 * b1);
    const float gb = (g1 * b2) / (g2 * b1);
    dst.rg.at(y, x) = rg;
    dst.rb.at(y, x) = rb;
    dst.gb.at(y, x) = gb;
    return std::abs(std::log(rg)) + std::abs(std::log(rb)) + std::abs(std::log(gb));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float s = fill(out.right, y, x, y, std::min(x + 1, w - 1)) +
                      fill(out.down, y, x, std::min(y + 1, h - 1), x);
      out.strength.at(y, x) = s;
    }
  }
  return out;
}

ImageRGB mean_reflectance_estimate(const ImageRGB& img, const SegmentMap& seg) {
  if (seg.height() != img.height() || seg.width() != img.width()) {
    throw Error(ErrorCode::SizeMismatch, "segment map does not cover the image");
  }
  const int k = seg.segment_count();
  std::vector<std::array<double, 3>> sums(k, {0.0, 0.0, 0.0});
  std::vector<size_t> counts(k, 0);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const int l = seg.label(y, x);
      for (int c = 0; c < 3; ++c) sums[l][c] += img.at(y, x, c);
      ++counts[l];
    }
  }
  std::vector<std::array<float, 3>> means(k);
  for (int l = 0; l < k; ++l) {
    for (int c = 0; c < 3; ++c) means[l][c] = static_cast<float>(sums[l][c] / counts[l]);
  }
  ImageRGB out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = means[seg.label(y, x)][c];
    }
  }
  return out;
}

GrayImage inverse_shading_estimate(const ImageRGB& img, const ImageRGB& r_est, float eps) {
  if (!img.same_size(r_est)) {
    throw Error(ErrorCode::SizeMismatch, "reflectance estimate does not match image size");
  }
  GrayImage out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      float acc = 0.0f;
      for (int c = 0; c < 3; ++c) acc += img.at(y, x, c) / std::max(r_est.at(y, x, c), eps);
      out.at(y, x) = std::clamp(acc / 3.0f, 0.0f, kMaxShadingEstimate);
    }
  }
  return out;
}

ImageRGB normalized_rgb(const ImageRGB& img, float eps) {
  ImageRGB out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const float sum = std::max(img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2), eps);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, c) / sum;
    }
  }
  return out;
}

namespace {

std::vector<float> gaussian_kernel(float sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0f * sigma)));
  std::vector<float> k(2 * radius + 1);
  float sum = 0.0f;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5f * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (float& v : k) v /= sum;
  return k;
}

GrayImage blur_replicate(const GrayImage& src, float sigma) {
  const std::vector<float> k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int h = src.height(), w = src.width();
  GrayImage tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * src.at(y, std::clamp(x + i, 0, w - 1));
      tmp.at(y, x) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(std::clamp(y + i, 0, h - 1), x);
      out.at(y, x) = acc;
    }
  }
  return out;
}

}  // namespace

GrayImage canny(const GrayImage& gray, const CannyParams& p) {
  if (!(p.sigma > 0.0f) || p.lo < 0.0f || !(p.lo < p.hi) || p.hi > 1.0f) {
    throw Error(ErrorCode::BadInput, "canny requires sigma > 0 and 0 <= lo < hi <= 1");
  }
  const int h = gray.height(), w = gray.width();
  const GrayImage smooth = blur_replicate(gray, p.sigma);
  auto px = [&](int y, int x) { return smooth.at(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)); };

  std::vector<float> mag(static_cast<size_t>(h) * w), gx(mag.size()), gy(mag.size());
  float max_mag = 0.0f;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float dx = (px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1)) -
                       (px(y - 1, x - 1) + 2 * px(y, x - 1) + px(y + 1, x - 1));
      const float dy = (px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1)) -
                       (px(y - 1, x - 1) + 2 * px(y - 1, x) + px(y - 1, x + 1));
      const size_t i = static_cast<size_t>(y) * w + x;
      gx[i] = dx;
      gy[i] = dy;
      mag[i] = std::hypot(dx, dy);
      max_mag = std::max(max_mag, mag[i]);
    }
  }
  GrayImage edges(h, w);
  // Below this the image is flat up to rounding noise.
  if (max_mag < 1e-6f) return edges;
  for (float& m : mag) m /= max_mag;

  auto m_at = [&](int y, int x) -> float {
    if (y < 0 || y >= h || x < 0 || x >= w) return 0.0f;
    return mag[static_cast<size_t>(y) * w + x];
  };
  // 0: strong, 1: weak, 2: none
  std::vector<std::uint8_t> state(mag.size(), 2);
  constexpr float kTan22 = 0.41421356f;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      const float m = mag[i];
      if (m < p.lo) continue;
      const float ax = std::abs(gx[i]), ay = std::abs(gy[i]);
      float n1, n2;
      if (ay <= kTan22 * ax) {  // horizontal gradient
        n1 = m_at(y, x - 1);
        n2 = m_at(y, x + 1);
      } else if (ax <= kTan22 * ay) {  // vertical gradient
        n1 = m_at(y - 1, x);
        n2 = m_at(y + 1, x);
      } else if ((gx[i] > 0) == (gy[i] > 0)) {
        n1 = m_at(y - 1, x - 1);
        n2 = m_at(y + 1, x + 1);
      } else {
        n1 = m_at(y - 1, x + 1);
        n2 = m_at(y + 1, x - 1);
      }
      if (m > n1 && m >= n2) state[i] = m >= p.hi ? 0 : 1;
    }
  }
  std::deque<size_t> queue;
  for (size_t i = 0; i < state.size(); ++i) {
    if (state[i] == 0) queue.push_back(i);
  }
  while (!queue.empty()) {
    const size_t i = queue.front();
    queue.pop_front();
    const int y = static_cast<int>(i / w), x = static_cast<int>(i % w);
    edges.at(y, x) = 1.0f;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int yy = y + dy, xx = x + dx;
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
        const size_t j = static_cast<size_t>(yy) * w + xx;
        if (state[j] == 1) {
          state[j] = 0;
          queue.push_back(j);
        }
      }
    }
  }
  return edges;
}

GrayImage area_downsample(const GrayImage& img, int factor) {
  const int h = img.height() / factor, w = img.width() / factor;
  GrayImage out(h, w);
  const float inv = 1.0f / static_cast<float>(factor * factor);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) acc += img.at(y * factor + dy, x * factor + dx);
      }
      out.at(y, x) = acc * inv;
    }
  }
  return out;
}

EdgePyramid canny_edge_pyramid(const ImageRGB& reflectance, const CannyParams& params) {
  if (std::min(reflectance.height(), reflectance.width()) < 16) {
    throw Error(ErrorCode::DegenerateImage, "edge pyramid needs images of at least 16x16");
  }
  EdgePyramid pyr;
  pyr.full = canny(luminance(reflectance), params);
  auto rebinarize = [](GrayImage img) {
    for (float& v : img.data()) v = v >= 0.25f ? 1.0f : 0.0f;
    return img;
  };
  pyr.half = rebinarize(area_downsample(pyr.full, 2));
  pyr.quarter = rebinarize(area_downsample(pyr.full, 4));
  return pyr;
}

PriorBundle compute_bundle(const ImageRGB& img, const SegmentMap& seg, float eps) {
  PriorBundle b;
  b.ccr = ccr_maps(img, eps);
  b.r_est = mean_reflectance_estimate(img, seg);
  b.s_est = inverse_shading_estimate(img, b.r_est, eps);
  b.nrgb = normalized_rgb(img, eps);
  return b;
}

}  // namespace iid::priors
