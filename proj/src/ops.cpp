#include "iidlab/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>

namespace iid::ad {

namespace testing {
namespace {
std::atomic<Fault> g_fault{Fault::None};
}
void set_fault(Fault f) { g_fault = f; }
Fault fault() { return g_fault; }
}  // namespace testing

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
using Node = typename Tensor<T>::Node;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

/// Parent i if it participates in differentiation, else nullptr.
template <typename N>
N* grad_parent(N& self, std::size_t i) {
  N* p = self.parents[i].get();
  return (p && p->requires_grad) ? p : nullptr;
}

// Geometry of a convolution reading a C x H x W image into an OH x OW output.
struct ConvGeom {
  int c, h, w, k, stride, pad, oh, ow;
  int rows() const { return c * k * k; }
  int cols() const { return oh * ow; }
};

template <typename T>
void im2col(const T* img, const ConvGeom& g, T* col) {
  for (int ci = 0; ci < g.c; ++ci) {
    for (int kh = 0; kh < g.k; ++kh) {
      for (int kw = 0; kw < g.k; ++kw) {
        T* dst = col + static_cast<std::size_t>((ci * g.k + kh) * g.k + kw) * g.cols();
        const T* plane = img + static_cast<std::size_t>(ci) * g.h * g.w;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + kh;
          T* row = dst + static_cast<std::size_t>(oy) * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill(row, row + g.ow, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kw;
            row[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const ConvGeom& g, T* img) {
  for (int ci = 0; ci < g.c; ++ci) {
    for (int kh = 0; kh < g.k; ++kh) {
      for (int kw = 0; kw < g.k; ++kw) {
        const T* src = col + static_cast<std::size_t>((ci * g.k + kh) * g.k + kw) * g.cols();
        T* plane = img + static_cast<std::size_t>(ci) * g.h * g.w;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + kh;
          if (iy < 0 || iy >= g.h) continue;
          const T* row = src + static_cast<std::size_t>(oy) * g.ow;
          T* dst = plane + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kw;
            if (ix >= 0 && ix < g.w) dst[ix] += row[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void check_bias(const Tensor<T>& b, int channels) {
  if (!b.defined()) return;
  require(b.numel() == static_cast<std::size_t>(channels),
          "bias has " + std::to_string(b.numel()) + " entries, expected " + std::to_string(channels));
}

template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& x, F f, D df) {
  std::vector<T> out(x.numel());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return make_result<T>(x.shape(), std::move(out), {&x}, [df](Node<T>& self) {
    Node<T>* px = grad_parent(self, 0);
    if (!px) return;
    auto& g = px->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(px->value[i], self.value[i]);
  });
}

template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, const char* name, F f, DA da, DB db) {
  require(a.shape() == b.shape(), std::string(name) + ": shape mismatch " + a.shape().str() +
                                      " vs " + b.shape().str());
  std::vector<T> out(a.numel());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [da, db](Node<T>& self) {
    Node<T>* pa = grad_parent(self, 0);
    Node<T>* pb = grad_parent(self, 1);
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (pa) {
      auto& g = pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * da(av[i], bv[i]);
    }
    if (pb) {
      auto& g = pb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * db(av[i], bv[i]);
    }
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Convolutions

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int pad) {
  const Shape xs = x.shape(), ws = w.shape();
  require(ws.c == xs.c, "conv2d: input has " + std::to_string(xs.c) + " channels, kernel expects " +
                            std::to_string(ws.c));
  require(ws.h == ws.w && stride >= 1 && pad >= 0, "conv2d: bad kernel geometry");
  check_bias(b, ws.n);
  const ConvGeom g{xs.c, xs.h, xs.w, ws.h, stride, pad,
                   (xs.h + 2 * pad - ws.h) / stride + 1, (xs.w + 2 * pad - ws.h) / stride + 1};
  require(g.oh >= 1 && g.ow >= 1, "conv2d: kernel larger than padded input");
  const Shape ys{xs.n, ws.n, g.oh, g.ow};
  std::vector<T> out(ys.numel());
  std::vector<T> col(static_cast<std::size_t>(g.rows()) * g.cols());
  ConstMatMap<T> wm(w.values().data(), ws.n, g.rows());
  for (int n = 0; n < xs.n; ++n) {
    im2col(x.values().data() + n * xs.c * xs.plane(), g, col.data());
    MatMap<T> ym(out.data() + n * ys.c * ys.plane(), ys.c, g.cols());
    ym.noalias() = wm * ConstMatMap<T>(col.data(), g.rows(), g.cols());
    if (b.defined()) {
      for (int co = 0; co < ys.c; ++co) ym.row(co).array() += b.values()[co];
    }
  }
  return make_result<T>(ys, std::move(out), {&x, &w, &b}, [g, xs, ys](Node<T>& self) {
    Node<T>* px = grad_parent(self, 0);
    Node<T>* pw = grad_parent(self, 1);
    Node<T>* pb = grad_parent(self, 2);
    const Node<T>& xn = *self.parents[0];
    const Node<T>& wn = *self.parents[1];
    std::vector<T> col(static_cast<std::size_t>(g.rows()) * g.cols());
    ConstMatMap<T> wm(wn.value.data(), ys.c, g.rows());
    const T sign = testing::fault() == testing::Fault::ConvBackwardSignFlip ? T(-1) : T(1);
    for (int n = 0; n < xs.n; ++n) {
      ConstMatMap<T> dy(self.grad.data() + n * ys.c * ys.plane(), ys.c, g.cols());
      if (pw) {
        im2col(xn.value.data() + n * xs.c * xs.plane(), g, col.data());
        MatMap<T> dw(pw->ensure_grad().data(), ys.c, g.rows());
        dw.noalias() += dy * ConstMatMap<T>(col.data(), g.rows(), g.cols()).transpose();
      }
      if (pb) {
        auto& db = pb->ensure_grad();
        // plain loop: Eigen's vectorised sum depends on the row's address alignment
        for (int co = 0; co < ys.c; ++co) {
          T acc = 0;
          for (Eigen::Index j = 0; j < dy.cols(); ++j) acc += dy(co, j);
          db[co] += acc;
        }
      }
      if (px) {
        MatMap<T> dcol(col.data(), g.rows(), g.cols());
        dcol.noalias() = sign * (wm.transpose() * dy);
        col2im(col.data(), g, px->ensure_grad().data() + n * xs.c * xs.plane());
      }
    }
  });
}

template <typename T>
Tensor<T> deconv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int pad) {
  const Shape xs = x.shape(), ws = w.shape();
  require(ws.n == xs.c, "deconv2d: input has " + std::to_string(xs.c) +
                            " channels, kernel expects " + std::to_string(ws.n));
  require(ws.h == ws.w && stride >= 1 && pad >= 0, "deconv2d: bad kernel geometry");
  check_bias(b, ws.c);
  const int k = ws.h;
  const Shape ys{xs.n, ws.c, stride * (xs.h - 1) + k - 2 * pad, stride * (xs.w - 1) + k - 2 * pad};
  require(ys.h >= 1 && ys.w >= 1, "deconv2d: empty output");
  // The adjoint conv reads the output grid and produces the input grid.
  const ConvGeom g{ys.c, ys.h, ys.w, k, stride, pad, xs.h, xs.w};
  std::vector<T> out(ys.numel(), T(0));
  std::vector<T> col(static_cast<std::size_t>(g.rows()) * g.cols());
  ConstMatMap<T> wm(w.values().data(), xs.c, g.rows());
  for (int n = 0; n < xs.n; ++n) {
    MatMap<T> cm(col.data(), g.rows(), g.cols());
    cm.noalias() = wm.transpose() * ConstMatMap<T>(x.values().data() + n * xs.c * xs.plane(), xs.c, g.cols());
    T* yn = out.data() + n * ys.c * ys.plane();
    col2im(col.data(), g, yn);
    if (b.defined()) {
      for (int co = 0; co < ys.c; ++co) {
        T* plane = yn + co * ys.plane();
        std::for_each(plane, plane + ys.plane(), [v = b.values()[co]](T& y) { y += v; });
      }
    }
  }
  return make_result<T>(ys, std::move(out), {&x, &w, &b}, [g, xs, ys](Node<T>& self) {
    Node<T>* px = grad_parent(self, 0);
    Node<T>* pw = grad_parent(self, 1);
    Node<T>* pb = grad_parent(self, 2);
    const Node<T>& xn = *self.parents[0];
    const Node<T>& wn = *self.parents[1];
    std::vector<T> col(static_cast<std::size_t>(g.rows()) * g.cols());
    ConstMatMap<T> wm(wn.value.data(), xs.c, g.rows());
    for (int n = 0; n < xs.n; ++n) {
      const T* dyn = self.grad.data() + n * ys.c * ys.plane();
      if (pb) {
        auto& db = pb->ensure_grad();
        for (int co = 0; co < ys.c; ++co) {
          const T* plane = dyn + co * ys.plane();
          T acc = 0;
          for (std::size_t i = 0; i < ys.plane(); ++i) acc += plane[i];
          db[co] += acc;
        }
      }
      if (!px && !pw) continue;
      im2col(dyn, g, col.data());
      ConstMatMap<T> dcol(col.data(), g.rows(), g.cols());
      if (px) {
        MatMap<T> dx(px->ensure_grad().data() + n * xs.c * xs.plane(), xs.c, g.cols());
        dx.noalias() += wm * dcol;
      }
      if (pw) {
        MatMap<T> dw(pw->ensure_grad().data(), xs.c, g.rows());
        dw.noalias() += ConstMatMap<T>(xn.value.data() + n * xs.c * xs.plane(), xs.c, g.cols()) *
                        dcol.transpose();
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Batch normalisation

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, Mode mode, T momentum, T eps) {
  const Shape s = x.shape();
  require(gamma.numel() == static_cast<std::size_t>(s.c) && beta.numel() == gamma.numel(),
          "batchnorm2d: affine parameters do not match channel count");
  require(state.running_mean.size() == static_cast<std::size_t>(s.c),
          "batchnorm2d: running statistics do not match channel count");
  const std::size_t m = static_cast<std::size_t>(s.n) * s.plane();
  const auto xv = x.values();
  std::vector<T> out(x.numel());
  std::vector<T> xhat(x.numel());
  std::vector<T> inv_std(s.c);
  auto index = [s](int n, int c) { return (static_cast<std::size_t>(n) * s.c + c) * s.plane(); };

  if (mode == Mode::Train) {
    if (m < 2) {
      throw Error(ErrorCode::DegenerateBatch, "batchnorm2d needs N*H*W >= 2 in train mode");
    }
    for (int c = 0; c < s.c; ++c) {
      double acc = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const T* p = xv.data() + index(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) acc += p[i];
      }
      const double mu = acc / static_cast<double>(m);
      double var = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const T* p = xv.data() + index(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) var += (p[i] - mu) * (p[i] - mu);
      }
      var /= static_cast<double>(m);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + eps));
      state.running_mean[c] = (T(1) - momentum) * state.running_mean[c] + momentum * static_cast<T>(mu);
      state.running_var[c] = (T(1) - momentum) * state.running_var[c] + momentum * static_cast<T>(var);
      for (int n = 0; n < s.n; ++n) {
        const std::size_t base = index(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) {
          xhat[base + i] = static_cast<T>((xv[base + i] - mu) * inv_std[c]);
        }
      }
    }
  } else {
    for (int c = 0; c < s.c; ++c) {
      inv_std[c] = T(1) / std::sqrt(state.running_var[c] + eps);
      for (int n = 0; n < s.n; ++n) {
        const std::size_t base = index(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) {
          xhat[base + i] = (xv[base + i] - state.running_mean[c]) * inv_std[c];
        }
      }
    }
  }
  const auto gv = gamma.values(), bv = beta.values();
  for (int c = 0; c < s.c; ++c) {
    for (int n = 0; n < s.n; ++n) {
      const std::size_t base = index(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) out[base + i] = gv[c] * xhat[base + i] + bv[c];
    }
  }
  return make_result<T>(s, std::move(out), {&x, &gamma, &beta},
                        [s, m, mode, xhat = std::move(xhat), inv_std = std::move(inv_std),
                         index](Node<T>& self) {
    Node<T>* px = grad_parent(self, 0);
    Node<T>* pg = grad_parent(self, 1);
    Node<T>* pb = grad_parent(self, 2);
    const auto& gv = self.parents[1]->value;
    for (int c = 0; c < s.c; ++c) {
      T sum_dy = 0, sum_dy_xhat = 0;
      for (int n = 0; n < s.n; ++n) {
        const std::size_t base = index(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) {
          sum_dy += self.grad[base + i];
          sum_dy_xhat += self.grad[base + i] * xhat[base + i];
        }
      }
      if (pg) pg->ensure_grad()[c] += sum_dy_xhat;
      if (pb) pb->ensure_grad()[c] += sum_dy;
      if (!px) continue;
      auto& dx = px->ensure_grad();
      const T scale = gv[c] * inv_std[c];
      if (mode == Mode::Train) {
        const T mean_dy = sum_dy / static_cast<T>(m);
        const T mean_dy_xhat = sum_dy_xhat / static_cast<T>(m);
        for (int n = 0; n < s.n; ++n) {
          const std::size_t base = index(n, c);
          for (std::size_t i = 0; i < s.plane(); ++i) {
            dx[base + i] += scale * (self.grad[base + i] - mean_dy - xhat[base + i] * mean_dy_xhat);
          }
        }
      } else {
        for (int n = 0; n < s.n; ++n) {
          const std::size_t base = index(n, c);
          for (std::size_t i = 0; i < s.plane(); ++i) dx[base + i] += scale * self.grad[base + i];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(x, [](T v) { return v > T(0) ? v : T(0); },
               [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
               [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::abs(v); },
               [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary(x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> clamp_min(const Tensor<T>& x, T lo) {
  return unary(x, [lo](T v) { return v > lo ? v : lo; },
               [lo](T v, T) { return v > lo ? T(1) : T(0); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary(x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T offset) {
  return unary(x, [offset](T v) { return v + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
                [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
                [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; },
                [](T x, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, "div", [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
                [](T x, T y) { return -x / (y * y); });
}

// ---------------------------------------------------------------------------
// Layout

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs) {
  require(!xs.empty(), "concat: no inputs");
  Shape s = xs.front().shape();
  s.c = 0;
  for (const auto& x : xs) {
    const Shape& xs_ = x.shape();
    require(xs_.n == s.n && xs_.h == s.h && xs_.w == s.w,
            "concat: spatial/batch mismatch " + xs_.str() + " vs " + xs.front().shape().str());
    s.c += xs_.c;
  }
  std::vector<T> out(s.numel());
  std::vector<int> offsets;
  int off = 0;
  for (const auto& x : xs) {
    offsets.push_back(off);
    const Shape& xs_ = x.shape();
    for (int n = 0; n < s.n; ++n) {
      std::copy_n(x.values().data() + n * xs_.c * xs_.plane(), xs_.c * xs_.plane(),
                  out.data() + (static_cast<std::size_t>(n) * s.c + off) * s.plane());
    }
    off += xs_.c;
  }
  return make_result<T>(s, std::move(out), xs, [s, offsets](Node<T>& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node<T>* p = grad_parent(self, k);
      if (!p) continue;
      auto& g = p->ensure_grad();
      const int c = p->shape.c;
      for (int n = 0; n < s.n; ++n) {
        const T* src = self.grad.data() + (static_cast<std::size_t>(n) * s.c + offsets[k]) * s.plane();
        T* dst = g.data() + static_cast<std::size_t>(n) * c * s.plane();
        for (std::size_t i = 0; i < c * s.plane(); ++i) dst[i] += src[i];
      }
    }
  });
}

template <typename T>
Tensor<T> downsample2x(const Tensor<T>& x) {
  const Shape xs = x.shape();
  require(xs.h % 2 == 0 && xs.w % 2 == 0, "downsample2x: odd spatial size " + xs.str());
  const Shape ys{xs.n, xs.c, xs.h / 2, xs.w / 2};
  std::vector<T> out(ys.numel());
  const auto xv = x.values();
  for (std::size_t p = 0; p < static_cast<std::size_t>(xs.n) * xs.c; ++p) {
    const T* src = xv.data() + p * xs.plane();
    T* dst = out.data() + p * ys.plane();
    for (int y = 0; y < ys.h; ++y) {
      for (int xx = 0; xx < ys.w; ++xx) {
        const T* a = src + (2 * y) * xs.w + 2 * xx;
        dst[y * ys.w + xx] = (a[0] + a[1] + a[xs.w] + a[xs.w + 1]) * T(0.25);
      }
    }
  }
  return make_result<T>(ys, std::move(out), {&x}, [xs, ys](Node<T>& self) {
    Node<T>* px = grad_parent(self, 0);
    if (!px) return;
    auto& g = px->ensure_grad();
    for (std::size_t p = 0; p < static_cast<std::size_t>(xs.n) * xs.c; ++p) {
      const T* src = self.grad.data() + p * ys.plane();
      T* dst = g.data() + p * xs.plane();
      for (int y = 0; y < ys.h; ++y) {
        for (int xx = 0; xx < ys.w; ++xx) {
          const T v = src[y * ys.w + xx] * T(0.25);
          T* a = dst + (2 * y) * xs.w + 2 * xx;
          a[0] += v;
          a[1] += v;
          a[xs.w] += v;
          a[xs.w + 1] += v;
        }
      }
    }
  });
}

template <typename T>
Tensor<T> channel_sum(const Tensor<T>& x) {
  const Shape xs = x.shape();
  const Shape ys{xs.n, 1, xs.h, xs.w};
  std::vector<T> out(ys.numel(), T(0));
  const auto xv = x.values();
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const T* src = xv.data() + (static_cast<std::size_t>(n) * xs.c + c) * xs.plane();
      T* dst = out.data() + n * xs.plane();
      for (std::size_t i = 0; i < xs.plane(); ++i) dst[i] += src[i];
    }
  }
  return make_result<T>(ys, std::move(out), {&x}, [xs](Node<T>& self) {
    Node<T>* px = grad_parent(self, 0);
    if (!px) return;
    auto& g = px->ensure_grad();
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < xs.c; ++c) {
        T* dst = g.data() + (static_cast<std::size_t>(n) * xs.c + c) * xs.plane();
        const T* src = self.grad.data() + n * xs.plane();
        for (std::size_t i = 0; i < xs.plane(); ++i) dst[i] += src[i];
      }
    }
  });
}

template <typename T>
Tensor<T> broadcast_channels(const Tensor<T>& x, int channels) {
  const Shape xs = x.shape();
  require(xs.c == 1, "broadcast_channels: input must have one channel, got " + xs.str());
  const Shape ys{xs.n, channels, xs.h, xs.w};
  std::vector<T> out(ys.numel());
  const auto xv = x.values();
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < channels; ++c) {
      std::copy_n(xv.data() + n * xs.plane(), xs.plane(),
                  out.data() + (static_cast<std::size_t>(n) * channels + c) * xs.plane());
    }
  }
  return make_result<T>(ys, std::move(out), {&x}, [xs, channels](Node<T>& self) {
    Node<T>* px = grad_parent(self, 0);
    if (!px) return;
    auto& g = px->ensure_grad();
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < channels; ++c) {
        const T* src = self.grad.data() + (static_cast<std::size_t>(n) * channels + c) * xs.plane();
        T* dst = g.data() + n * xs.plane();
        for (std::size_t i = 0; i < xs.plane(); ++i) dst[i] += src[i];
      }
    }
  });
}

template <typename T>
Tensor<T> shift_diff(const Tensor<T>& x, Axis axis) {
  const Shape s = x.shape();
  const int step = axis == Axis::X ? 1 : s.w;
  auto valid = [s, axis](int y, int xx) { return axis == Axis::X ? xx + 1 < s.w : y + 1 < s.h; };
  std::vector<T> out(s.numel(), T(0));
  const auto xv = x.values();
  for (std::size_t p = 0; p < static_cast<std::size_t>(s.n) * s.c; ++p) {
    const T* src = xv.data() + p * s.plane();
    T* dst = out.data() + p * s.plane();
    for (int y = 0; y < s.h; ++y) {
      for (int xx = 0; xx < s.w; ++xx) {
        const int i = y * s.w + xx;
        if (valid(y, xx)) dst[i] = src[i + step] - src[i];
      }
    }
  }
  return make_result<T>(s, std::move(out), {&x}, [s, step, valid](Node<T>& self) {
    Node<T>* px = grad_parent(self, 0);
    if (!px) return;
    auto& g = px->ensure_grad();
    for (std::size_t p = 0; p < static_cast<std::size_t>(s.n) * s.c; ++p) {
      const T* src = self.grad.data() + p * s.plane();
      T* dst = g.data() + p * s.plane();
      for (int y = 0; y < s.h; ++y) {
        for (int xx = 0; xx < s.w; ++xx) {
          const int i = y * s.w + xx;
          if (!valid(y, xx)) continue;
          dst[i + step] += src[i];
          dst[i] -= src[i];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> gaussian_blur(const Tensor<T>& x, double sigma, int radius) {
  require(sigma > 0.0 && radius >= 0, "gaussian_blur: bad kernel");
  const Shape s = x.shape();
  std::vector<T> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = static_cast<T>(std::exp(-0.5 * i * i / (sigma * sigma)));
  }
  // Per-position normalisers over in-bounds taps, one per axis.
  auto norms = [&](int len) {
    std::vector<T> z(len, T(0));
    for (int p = 0; p < len; ++p) {
      for (int i = -radius; i <= radius; ++i) {
        if (p + i >= 0 && p + i < len) z[p] += k[i + radius];
      }
    }
    return z;
  };
  const std::vector<T> zx = norms(s.w), zy = norms(s.h);

  // Horizontal then vertical pass; the backward runs the transposed passes in reverse.
  auto pass_h = [=](const T* src, T* dst, bool adjoint) {
    for (int y = 0; y < s.h; ++y) {
      for (int xx = 0; xx < s.w; ++xx) {
        if (!adjoint) {
          T acc = 0;
          for (int i = -radius; i <= radius; ++i) {
            const int q = xx + i;
            if (q >= 0 && q < s.w) acc += k[i + radius] * src[y * s.w + q];
          }
          dst[y * s.w + xx] = acc / zx[xx];
        } else {
          const T v = src[y * s.w + xx] / zx[xx];
          for (int i = -radius; i <= radius; ++i) {
            const int q = xx + i;
            if (q >= 0 && q < s.w) dst[y * s.w + q] += k[i + radius] * v;
          }
        }
      }
    }
  };
  auto pass_v = [=](const T* src, T* dst, bool adjoint) {
    for (int y = 0; y < s.h; ++y) {
      for (int xx = 0; xx < s.w; ++xx) {
        if (!adjoint) {
          T acc = 0;
          for (int i = -radius; i <= radius; ++i) {
            const int q = y + i;
            if (q >= 0 && q < s.h) acc += k[i + radius] * src[q * s.w + xx];
          }
          dst[y * s.w + xx] = acc / zy[y];
        } else {
          const T v = src[y * s.w + xx] / zy[y];
          for (int i = -radius; i <= radius; ++i) {
            const int q = y + i;
            if (q >= 0 && q < s.h) dst[q * s.w + xx] += k[i + radius] * v;
          }
        }
      }
    }
  };
  std::vector<T> out(s.numel()), tmp(s.plane());
  const auto xv = x.values();
  for (std::size_t p = 0; p < static_cast<std::size_t>(s.n) * s.c; ++p) {
    pass_h(xv.data() + p * s.plane(), tmp.data(), false);
    pass_v(tmp.data(), out.data() + p * s.plane(), false);
  }
  return make_result<T>(s, std::move(out), {&x}, [s, pass_h, pass_v](Node<T>& self) {
    Node<T>* px = grad_parent(self, 0);
    if (!px) return;
    auto& g = px->ensure_grad();
    std::vector<T> tmp(s.plane());
    for (std::size_t p = 0; p < static_cast<std::size_t>(s.n) * s.c; ++p) {
      std::fill(tmp.begin(), tmp.end(), T(0));
      pass_v(self.grad.data() + p * s.plane(), tmp.data(), true);
      pass_h(tmp.data(), g.data() + p * s.plane(), true);
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.values()) acc += v;
  return make_result<T>(Shape{}, {acc}, {&x}, [](Node<T>& self) {
    Node<T>* px = grad_parent(self, 0);
    if (!px) return;
    for (T& g : px->ensure_grad()) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> mse(const Tensor<T>& x, const Tensor<T>& target) {
  require(x.shape() == target.shape(),
          "mse: shape mismatch " + x.shape().str() + " vs " + target.shape().str());
  const auto xv = x.values(), tv = target.values();
  T acc = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += (xv[i] - tv[i]) * (xv[i] - tv[i]);
  const T n = static_cast<T>(xv.size());
  return make_result<T>(Shape{}, {acc / n}, {&x, &target}, [n](Node<T>& self) {
    Node<T>* px = grad_parent(self, 0);
    Node<T>* pt = grad_parent(self, 1);
    const auto& xv = self.parents[0]->value;
    const auto& tv = self.parents[1]->value;
    const T k = T(2) * self.grad[0] / n;
    if (px) {
      auto& g = px->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * (xv[i] - tv[i]);
    }
    if (pt) {
      auto& g = pt->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= k * (xv[i] - tv[i]);
    }
  });
}

#define IID_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);     \
  template Tensor<T> deconv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);   \
  template Tensor<T> batchnorm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                 BatchNormState<T>&, Mode, T, T);                                \
  template Tensor<T> relu(const Tensor<T>&);                                                     \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                  \
  template Tensor<T> abs(const Tensor<T>&);                                                      \
  template Tensor<T> square(const Tensor<T>&);                                                   \
  template Tensor<T> clamp_min(const Tensor<T>&, T);                                             \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                            \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> concat(const std::vector<Tensor<T>>&);                                      \
  template Tensor<T> downsample2x(const Tensor<T>&);                                             \
  template Tensor<T> channel_sum(const Tensor<T>&);                                              \
  template Tensor<T> broadcast_channels(const Tensor<T>&, int);                                  \
  template Tensor<T> shift_diff(const Tensor<T>&, Axis);                                         \
  template Tensor<T> gaussian_blur(const Tensor<T>&, double, int);                               \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> mean(const Tensor<T>&);                                                     \
  template Tensor<T> mse(const Tensor<T>&, const Tensor<T>&);

IID_INSTANTIATE_OPS(float)
IID_INSTANTIATE_OPS(double)

}  // namespace iid::ad
