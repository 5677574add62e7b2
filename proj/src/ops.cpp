#include "gaitgcn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace gaitgcn {

namespace {

[[noreturn]] void shape_fail(const std::string& op, const std::string& what) {
  throw ShapeError(op + ": " + what);
}

void check_finite(const std::string& op, const Tensor& t) {
  if (!checked_mode() || !t.defined()) return;
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NonFiniteError(op + ": non-finite input value");
  }
}

void check_rank(const std::string& op, const Tensor& t, std::size_t rank, const char* name) {
  if (t.ndim() != rank) {
    shape_fail(op, std::string(name) + " must have rank " + std::to_string(rank) + ", got " +
                       shape_str(t.shape()));
  }
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

// For every flat index of `shape`, the flat index in the reduced shape
// obtained by dropping the axes flagged in `reduced`.
std::vector<std::size_t> reduction_map(const Shape& shape, const std::vector<bool>& reduced) {
  Shape out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (!reduced[i]) out_shape.push_back(shape[i]);
  }
  auto out_strides = strides_of(out_shape);
  std::vector<std::size_t> axis_stride(shape.size(), 0);
  for (std::size_t i = 0, j = 0; i < shape.size(); ++i) {
    if (!reduced[i]) axis_stride[i] = out_strides[j++];
  }
  std::vector<std::size_t> map(shape_numel(shape));
  std::vector<std::size_t> idx(shape.size(), 0);
  std::size_t out = 0;
  for (std::size_t flat = 0; flat < map.size(); ++flat) {
    map[flat] = out;
    for (std::size_t ax = shape.size(); ax-- > 0;) {
      ++idx[ax];
      out += axis_stride[ax];
      if (idx[ax] < shape[ax]) break;
      out -= axis_stride[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  return map;
}

struct Reduction {
  Shape out_shape;
  std::vector<std::size_t> map;
  std::size_t group = 1;
};

Reduction plan_reduction(const std::string& op, const Shape& shape,
                         std::vector<std::size_t> axes) {
  std::vector<bool> reduced(shape.size(), false);
  if (axes.empty()) shape_fail(op, "no axes given");
  for (std::size_t ax : axes) {
    if (ax >= shape.size()) {
      shape_fail(op, "axis " + std::to_string(ax) + " out of range for " + shape_str(shape));
    }
    if (reduced[ax]) shape_fail(op, "axis " + std::to_string(ax) + " repeated");
    reduced[ax] = true;
  }
  Reduction r;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (reduced[i]) {
      r.group *= shape[i];
    } else {
      r.out_shape.push_back(shape[i]);
    }
  }
  if (r.out_shape.empty()) r.out_shape = {1};
  r.map = reduction_map(shape, reduced);
  return r;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::string op = "matmul";
  check_rank(op, a, 2, "lhs");
  check_rank(op, b, 2, "rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    shape_fail(op, "inner dimensions differ: " + shape_str(a.shape()) + " x " +
                       shape_str(b.shape()));
  }
  check_finite(op, a);
  check_finite(op, b);
  auto A = a.data();
  auto B = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), op, {a, b},
                     [a, b, m, k, n](std::span<const double> g) {
                       auto A = a.data();
                       auto B = b.data();
                       if (a.requires_grad()) {
                         std::vector<double> ga(m * k, 0.0);
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t p = 0; p < k; ++p) {
                             double s = 0.0;
                             for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * B[p * n + j];
                             ga[i * k + p] = s;
                           }
                         }
                         accumulate_grad(a, ga);
                       }
                       if (b.requires_grad()) {
                         std::vector<double> gb(k * n, 0.0);
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t p = 0; p < k; ++p) {
                             const double av = A[i * k + p];
                             for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
                           }
                         }
                         accumulate_grad(b, gb);
                       }
                     });
}

Tensor batched_matmul(const Tensor& a, const Tensor& b) {
  const std::string op = "batched_matmul";
  check_rank(op, a, 3, "lhs");
  check_rank(op, b, 3, "rhs");
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  if (b.dim(0) != batch || b.dim(1) != k) {
    shape_fail(op, "incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  check_finite(op, a);
  check_finite(op, b);
  auto A = a.data();
  auto B = b.data();
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t q = 0; q < batch; ++q) {
    const double* Aq = A.data() + q * m * k;
    const double* Bq = B.data() + q * k * n;
    double* Oq = out.data() + q * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double av = Aq[i * k + p];
        for (std::size_t j = 0; j < n; ++j) Oq[i * n + j] += av * Bq[p * n + j];
      }
    }
  }
  return make_result(
      {batch, m, n}, std::move(out), op, {a, b}, [a, b, batch, m, k, n](std::span<const double> g) {
        auto A = a.data();
        auto B = b.data();
        std::vector<double> ga(a.requires_grad() ? batch * m * k : 0, 0.0);
        std::vector<double> gb(b.requires_grad() ? batch * k * n : 0, 0.0);
        for (std::size_t q = 0; q < batch; ++q) {
          const double* Aq = A.data() + q * m * k;
          const double* Bq = B.data() + q * k * n;
          const double* Gq = g.data() + q * m * n;
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              if (!ga.empty()) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) s += Gq[i * n + j] * Bq[p * n + j];
                ga[q * m * k + i * k + p] = s;
              }
              if (!gb.empty()) {
                const double av = Aq[i * k + p];
                for (std::size_t j = 0; j < n; ++j) gb[q * k * n + p * n + j] += av * Gq[i * n + j];
              }
            }
          }
        }
        if (!ga.empty()) accumulate_grad(a, ga);
        if (!gb.empty()) accumulate_grad(b, gb);
      });
}

namespace {

struct ConvGeometry {
  std::size_t N, C, H, W, O, KH, KW, Ho, Wo;
  Conv2dParams p;

  // Output column range [lo, hi) whose input column for tap kw is in bounds.
  std::pair<std::size_t, std::size_t> col_range(std::size_t kw) const {
    const long off = static_cast<long>(kw * p.dilation[1]) - static_cast<long>(p.padding[1]);
    const long s = static_cast<long>(p.stride[1]);
    long lo = off >= 0 ? 0 : (-off + s - 1) / s;
    long hi = (static_cast<long>(W) - 1 - off);
    hi = hi < 0 ? 0 : hi / s + 1;
    hi = std::min<long>(hi, static_cast<long>(Wo));
    lo = std::min(lo, hi);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
  }
  long in_row(std::size_t oh, std::size_t kh) const {
    return static_cast<long>(oh * p.stride[0] + kh * p.dilation[0]) -
           static_cast<long>(p.padding[0]);
  }
  std::size_t in_col(std::size_t ow, std::size_t kw) const {
    return ow * p.stride[1] + kw * p.dilation[1] - p.padding[1];
  }
};

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const Conv2dParams& params) {
  const std::string op = "conv2d";
  check_rank(op, x, 4, "input");
  check_rank(op, weight, 4, "weight");
  if (weight.dim(1) != x.dim(1)) {
    shape_fail(op, "channel mismatch between input " + shape_str(x.shape()) + " and weight " +
                       shape_str(weight.shape()));
  }
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != weight.dim(0))) {
    shape_fail(op, "bias " + shape_str(bias.shape()) + " does not match weight " +
                       shape_str(weight.shape()));
  }
  for (int i = 0; i < 2; ++i) {
    if (params.stride[i] < 1 || params.dilation[i] < 1) {
      shape_fail(op, "stride and dilation must be >= 1");
    }
  }
  check_finite(op, x);
  check_finite(op, weight);
  check_finite(op, bias);

  ConvGeometry geo{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), weight.dim(2),
                   weight.dim(3), 0, 0, params};
  const long span_h = static_cast<long>(params.dilation[0] * (geo.KH - 1) + 1);
  const long span_w = static_cast<long>(params.dilation[1] * (geo.KW - 1) + 1);
  const long eff_h = static_cast<long>(geo.H + 2 * params.padding[0]) - span_h;
  const long eff_w = static_cast<long>(geo.W + 2 * params.padding[1]) - span_w;
  if (eff_h < 0 || eff_w < 0) {
    shape_fail(op, "kernel " + shape_str(weight.shape()) + " larger than padded input " +
                       shape_str(x.shape()));
  }
  geo.Ho = static_cast<std::size_t>(eff_h) / params.stride[0] + 1;
  geo.Wo = static_cast<std::size_t>(eff_w) / params.stride[1] + 1;

  const auto X = x.data();
  const auto Wt = weight.data();
  std::vector<double> out(geo.N * geo.O * geo.Ho * geo.Wo, 0.0);
  for (std::size_t n = 0; n < geo.N; ++n) {
    for (std::size_t o = 0; o < geo.O; ++o) {
      double* plane = out.data() + (n * geo.O + o) * geo.Ho * geo.Wo;
      if (bias.defined()) std::fill(plane, plane + geo.Ho * geo.Wo, bias.data()[o]);
      for (std::size_t c = 0; c < geo.C; ++c) {
        const double* xin = X.data() + (n * geo.C + c) * geo.H * geo.W;
        for (std::size_t kh = 0; kh < geo.KH; ++kh) {
          for (std::size_t kw = 0; kw < geo.KW; ++kw) {
            const double wv = Wt[((o * geo.C + c) * geo.KH + kh) * geo.KW + kw];
            const auto [lo, hi] = geo.col_range(kw);
            for (std::size_t oh = 0; oh < geo.Ho; ++oh) {
              const long ih = geo.in_row(oh, kh);
              if (ih < 0 || ih >= static_cast<long>(geo.H)) continue;
              const double* row = xin + static_cast<std::size_t>(ih) * geo.W;
              double* orow = plane + oh * geo.Wo;
              for (std::size_t ow = lo; ow < hi; ++ow) orow[ow] += wv * row[geo.in_col(ow, kw)];
            }
          }
        }
      }
    }
  }

  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(
      {geo.N, geo.O, geo.Ho, geo.Wo}, std::move(out), op, std::move(inputs),
      [x, weight, bias, geo](std::span<const double> g) {
        const auto X = x.data();
        const auto Wt = weight.data();
        std::vector<double> gx(x.requires_grad() ? x.numel() : 0, 0.0);
        std::vector<double> gw(weight.requires_grad() ? weight.numel() : 0, 0.0);
        for (std::size_t n = 0; n < geo.N; ++n) {
          for (std::size_t o = 0; o < geo.O; ++o) {
            const double* gplane = g.data() + (n * geo.O + o) * geo.Ho * geo.Wo;
            for (std::size_t c = 0; c < geo.C; ++c) {
              const std::size_t xoff = (n * geo.C + c) * geo.H * geo.W;
              for (std::size_t kh = 0; kh < geo.KH; ++kh) {
                for (std::size_t kw = 0; kw < geo.KW; ++kw) {
                  const std::size_t widx = ((o * geo.C + c) * geo.KH + kh) * geo.KW + kw;
                  const double wv = Wt[widx];
                  const auto [lo, hi] = geo.col_range(kw);
                  double acc = 0.0;
                  for (std::size_t oh = 0; oh < geo.Ho; ++oh) {
                    const long ih = geo.in_row(oh, kh);
                    if (ih < 0 || ih >= static_cast<long>(geo.H)) continue;
                    const std::size_t rowoff = xoff + static_cast<std::size_t>(ih) * geo.W;
                    const double* grow = gplane + oh * geo.Wo;
                    for (std::size_t ow = lo; ow < hi; ++ow) {
                      const std::size_t xi = rowoff + geo.in_col(ow, kw);
                      if (!gx.empty()) gx[xi] += wv * grow[ow];
                      acc += grow[ow] * X[xi];
                    }
                  }
                  if (!gw.empty()) gw[widx] += acc;
                }
              }
            }
          }
        }
        if (!gx.empty()) accumulate_grad(x, gx);
        if (!gw.empty()) accumulate_grad(weight, gw);
        if (bias.defined() && bias.requires_grad()) {
          std::vector<double> gb(geo.O, 0.0);
          const std::size_t plane = geo.Ho * geo.Wo;
          for (std::size_t n = 0; n < geo.N; ++n) {
            for (std::size_t o = 0; o < geo.O; ++o) {
              const double* gp = g.data() + (n * geo.O + o) * plane;
              for (std::size_t i = 0; i < plane; ++i) gb[o] += gp[i];
            }
          }
          accumulate_grad(bias, gb);
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const std::string op = "add";
  if (a.shape() != b.shape()) {
    shape_fail(op, "shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  check_finite(op, a);
  check_finite(op, b);
  std::vector<double> out(a.numel());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  return make_result(a.shape(), std::move(out), op, {a, b}, [a, b](std::span<const double> g) {
    accumulate_grad(a, g);
    accumulate_grad(b, g);
  });
}

Tensor multiply(const Tensor& a, const Tensor& b) {
  const std::string op = "multiply";
  if (a.shape() != b.shape()) {
    shape_fail(op, "shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  check_finite(op, a);
  check_finite(op, b);
  std::vector<double> out(a.numel());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return make_result(a.shape(), std::move(out), op, {a, b}, [a, b](std::span<const double> g) {
    const std::size_t n = g.size();
    if (a.requires_grad()) {
      std::vector<double> ga(n);
      auto B = b.data();
      for (std::size_t i = 0; i < n; ++i) ga[i] = g[i] * B[i];
      accumulate_grad(a, ga);
    }
    if (b.requires_grad()) {
      std::vector<double> gb(n);
      auto A = a.data();
      for (std::size_t i = 0; i < n; ++i) gb[i] = g[i] * A[i];
      accumulate_grad(b, gb);
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  check_finite("scale", x);
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v *= factor;
  return make_result(x.shape(), std::move(out), "scale", {x},
                     [x, factor](std::span<const double> g) {
                       std::vector<double> gx(g.begin(), g.end());
                       for (double& v : gx) v *= factor;
                       accumulate_grad(x, gx);
                     });
}

Tensor add_bias(const Tensor& x, const Tensor& bias, std::size_t axis) {
  const std::string op = "add_bias";
  if (axis >= x.ndim() || bias.ndim() != 1 || bias.dim(0) != x.dim(axis)) {
    shape_fail(op, "bias " + shape_str(bias.shape()) + " does not fit axis " +
                       std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  check_finite(op, x);
  check_finite(op, bias);
  const auto strides = strides_of(x.shape());
  const std::size_t inner = strides[axis], len = x.dim(axis);
  std::vector<double> out(x.data().begin(), x.data().end());
  auto B = bias.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[(i / inner) % len];
  return make_result(x.shape(), std::move(out), op, {x, bias},
                     [x, bias, inner, len](std::span<const double> g) {
                       accumulate_grad(x, g);
                       if (bias.requires_grad()) {
                         std::vector<double> gb(len, 0.0);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[(i / inner) % len] += g[i];
                         accumulate_grad(bias, gb);
                       }
                     });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_bias(matmul(x, weight), bias, 1);
}

Tensor relu(const Tensor& x) {
  check_finite("relu", x);
  std::vector<double> out(x.numel());
  auto X = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] > 0.0 ? X[i] : 0.0;
  return make_result(x.shape(), std::move(out), "relu", {x}, [x](std::span<const double> g) {
    auto X = x.data();
    std::vector<double> gx(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = X[i] > 0.0 ? g[i] : 0.0;
    accumulate_grad(x, gx);
  });
}

Tensor sigmoid(const Tensor& x) {
  check_finite("sigmoid", x);
  std::vector<double> out(x.numel());
  auto X = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = X[i];
    // Split by sign so the exponential never overflows.
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  auto saved = out;
  return make_result(x.shape(), std::move(out), "sigmoid", {x},
                     [x, saved = std::move(saved)](std::span<const double> g) {
                       std::vector<double> gx(g.size());
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         gx[i] = g[i] * saved[i] * (1.0 - saved[i]);
                       }
                       accumulate_grad(x, gx);
                     });
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BatchNormState& state, bool training) {
  const std::string op = "batchnorm";
  if (x.ndim() < 2) shape_fail(op, "input needs at least 2 axes, got " + shape_str(x.shape()));
  const std::size_t C = x.dim(1);
  for (const Tensor* t : {&gamma, &beta, static_cast<const Tensor*>(&state.running_mean),
                          static_cast<const Tensor*>(&state.running_var)}) {
    if (t->ndim() != 1 || t->dim(0) != C) {
      shape_fail(op, "per-channel tensor " + shape_str(t->shape()) + " does not match input " +
                         shape_str(x.shape()));
    }
  }
  check_finite(op, x);
  const std::size_t N = x.dim(0);
  const std::size_t inner = x.numel() / (N * C);
  const std::size_t count = N * inner;
  auto X = x.data();

  std::vector<double> mu(C, 0.0), var(C, 0.0);
  if (training) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t c = 0; c < C; ++c) {
        const double* p = X.data() + (n * C + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) mu[c] += p[i];
      }
    }
    for (double& m : mu) m /= static_cast<double>(count);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t c = 0; c < C; ++c) {
        const double* p = X.data() + (n * C + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) var[c] += (p[i] - mu[c]) * (p[i] - mu[c]);
      }
    }
    for (double& v : var) v /= static_cast<double>(count);
    auto rm = state.running_mean.mutable_data();
    auto rv = state.running_var.mutable_data();
    const double unbias = count > 1 ? static_cast<double>(count) / (count - 1) : 1.0;
    for (std::size_t c = 0; c < C; ++c) {
      rm[c] = (1.0 - state.momentum) * rm[c] + state.momentum * mu[c];
      rv[c] = (1.0 - state.momentum) * rv[c] + state.momentum * var[c] * unbias;
    }
  } else {
    auto rm = state.running_mean.data();
    auto rv = state.running_var.data();
    std::copy(rm.begin(), rm.end(), mu.begin());
    std::copy(rv.begin(), rv.end(), var.begin());
  }

  std::vector<double> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + state.eps);
  std::vector<double> xhat(x.numel()), out(x.numel());
  auto G = gamma.data();
  auto B = beta.data();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (n * C + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        xhat[off + i] = (X[off + i] - mu[c]) * inv_std[c];
        out[off + i] = G[c] * xhat[off + i] + B[c];
      }
    }
  }
  return make_result(
      x.shape(), std::move(out), op, {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std, N, C, inner, count,
       training](std::span<const double> g) {
        std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t off = (n * C + c) * inner;
            for (std::size_t i = 0; i < inner; ++i) {
              sum_g[c] += g[off + i];
              sum_gx[c] += g[off + i] * xhat[off + i];
            }
          }
        }
        if (gamma.requires_grad()) accumulate_grad(gamma, sum_gx);
        if (beta.requires_grad()) accumulate_grad(beta, sum_g);
        if (!x.requires_grad()) return;
        auto G = gamma.data();
        std::vector<double> gx(x.numel());
        const double m = static_cast<double>(count);
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t off = (n * C + c) * inner;
            const double k = G[c] * inv_std[c];
            for (std::size_t i = 0; i < inner; ++i) {
              if (training) {
                gx[off + i] =
                    k * (g[off + i] - sum_g[c] / m - xhat[off + i] * sum_gx[c] / m);
              } else {
                gx[off + i] = k * g[off + i];
              }
            }
          }
        }
        accumulate_grad(x, gx);
      });
}

Tensor mean(const Tensor& x, std::vector<std::size_t> axes) {
  const std::string op = "mean";
  auto plan = plan_reduction(op, x.shape(), std::move(axes));
  check_finite(op, x);
  std::vector<double> out(shape_numel(plan.out_shape), 0.0);
  auto X = x.data();
  for (std::size_t i = 0; i < X.size(); ++i) out[plan.map[i]] += X[i];
  const double inv = 1.0 / static_cast<double>(plan.group);
  for (double& v : out) v *= inv;
  return make_result(plan.out_shape, std::move(out), op, {x},
                     [x, map = std::move(plan.map), inv](std::span<const double> g) {
                       std::vector<double> gx(map.size());
                       for (std::size_t i = 0; i < map.size(); ++i) gx[i] = g[map[i]] * inv;
                       accumulate_grad(x, gx);
                     });
}

Tensor max(const Tensor& x, std::vector<std::size_t> axes) {
  const std::string op = "max";
  auto plan = plan_reduction(op, x.shape(), std::move(axes));
  check_finite(op, x);
  const std::size_t n_out = shape_numel(plan.out_shape);
  std::vector<double> out(n_out, 0.0);
  std::vector<std::size_t> arg(n_out, SIZE_MAX);
  auto X = x.data();
  // First occurrence wins ties, so the subgradient is deterministic.
  for (std::size_t i = 0; i < X.size(); ++i) {
    const std::size_t o = plan.map[i];
    if (arg[o] == SIZE_MAX || X[i] > out[o]) {
      out[o] = X[i];
      arg[o] = i;
    }
  }
  const std::size_t n_in = X.size();
  return make_result(plan.out_shape, std::move(out), op, {x},
                     [x, arg = std::move(arg), n_in](std::span<const double> g) {
                       std::vector<double> gx(n_in, 0.0);
                       for (std::size_t o = 0; o < arg.size(); ++o) gx[arg[o]] += g[o];
                       accumulate_grad(x, gx);
                     });
}

Tensor sum(const Tensor& x) {
  check_finite("sum", x);
  double s = 0.0;
  for (double v : x.data()) s += v;
  const std::size_t n = x.numel();
  return make_result({1}, {s}, "sum", {x}, [x, n](std::span<const double> g) {
    std::vector<double> gx(n, g[0]);
    accumulate_grad(x, gx);
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  const std::string op = "concat";
  if (parts.empty()) shape_fail(op, "no inputs");
  const Shape& base = parts.front().shape();
  if (axis >= base.size()) {
    shape_fail(op, "axis " + std::to_string(axis) + " out of range for " + shape_str(base));
  }
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == base.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == base[i];
    if (!ok) {
      shape_fail(op, "shape " + shape_str(s) + " incompatible with " + shape_str(base) +
                         " along axis " + std::to_string(axis));
    }
    check_finite(op, p);
    total += s[axis];
  }
  Shape out_shape = base;
  out_shape[axis] = total;
  const auto strides = strides_of(base);
  const std::size_t inner = strides[axis];
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= base[i];

  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> widths;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(axis) * inner;
    auto P = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(P.data() + o * w, w, out.data() + o * total * inner + offset);
    }
    widths.push_back(w);
    offset += w;
  }
  return make_result(out_shape, std::move(out), op, parts,
                     [parts, widths, outer, row = total * inner](std::span<const double> g) {
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < parts.size(); ++k) {
                         const std::size_t w = widths[k];
                         if (parts[k].requires_grad()) {
                           std::vector<double> gp(outer * w);
                           for (std::size_t o = 0; o < outer; ++o) {
                             std::copy_n(g.data() + o * row + offset, w, gp.data() + o * w);
                           }
                           accumulate_grad(parts[k], gp);
                         }
                         offset += w;
                       }
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    shape_fail("reshape", "cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), "reshape", {x},
                     [x](std::span<const double> g) { accumulate_grad(x, g); });
}

Tensor transpose(const Tensor& x, std::vector<std::size_t> perm) {
  const std::string op = "transpose";
  const Shape& in = x.shape();
  if (perm.size() != in.size()) {
    shape_fail(op, "permutation length " + std::to_string(perm.size()) + " for " + shape_str(in));
  }
  std::vector<bool> used(in.size(), false);
  for (std::size_t p : perm) {
    if (p >= in.size() || used[p]) shape_fail(op, "invalid permutation for " + shape_str(in));
    used[p] = true;
  }
  Shape out_shape(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out_shape[i] = in[perm[i]];
  const auto in_strides = strides_of(in);
  std::vector<std::size_t> step(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) step[i] = in_strides[perm[i]];

  // src[i] = input flat index of output element i.
  std::vector<std::size_t> src(x.numel());
  std::vector<std::size_t> idx(in.size(), 0);
  std::size_t s = 0;
  for (std::size_t flat = 0; flat < src.size(); ++flat) {
    src[flat] = s;
    for (std::size_t ax = in.size(); ax-- > 0;) {
      ++idx[ax];
      s += step[ax];
      if (idx[ax] < out_shape[ax]) break;
      s -= step[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  auto X = x.data();
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = X[src[i]];
  return make_result(out_shape, std::move(out), op, {x},
                     [x, src = std::move(src)](std::span<const double> g) {
                       std::vector<double> gx(src.size());
                       for (std::size_t i = 0; i < src.size(); ++i) gx[src[i]] = g[i];
                       accumulate_grad(x, gx);
                     });
}

Tensor transpose(const Tensor& x) {
  check_rank("transpose", x, 2, "input");
  return transpose(x, {1, 0});
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const std::string op = "slice";
  if (axis >= x.ndim() || length == 0 || start + length > x.dim(axis)) {
    shape_fail(op, "range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                       ") on axis " + std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  const auto strides = strides_of(x.shape());
  const std::size_t inner = strides[axis];
  const std::size_t full = x.dim(axis) * inner;
  const std::size_t outer = x.numel() / full;
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<double> out(outer * length * inner);
  auto X = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(X.data() + o * full + start * inner, length * inner,
                out.data() + o * length * inner);
  }
  const std::size_t n_in = x.numel();
  return make_result(out_shape, std::move(out), op, {x},
                     [x, outer, full, inner, start, length, n_in](std::span<const double> g) {
                       std::vector<double> gx(n_in, 0.0);
                       for (std::size_t o = 0; o < outer; ++o) {
                         std::copy_n(g.data() + o * length * inner, length * inner,
                                     gx.data() + o * full + start * inner);
                       }
                       accumulate_grad(x, gx);
                     });
}

Tensor expand(const Tensor& x, Shape shape) {
  const std::string op = "expand";
  const Shape& in = x.shape();
  bool ok = in.size() == shape.size();
  for (std::size_t i = 0; ok && i < in.size(); ++i) ok = in[i] == shape[i] || in[i] == 1;
  if (!ok) shape_fail(op, "cannot expand " + shape_str(in) + " to " + shape_str(shape));
  std::vector<bool> broadcast(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) broadcast[i] = in[i] != shape[i];
  auto map = reduction_map(shape, broadcast);
  auto X = x.data();
  std::vector<double> out(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = X[map[i]];
  const std::size_t n_in = x.numel();
  return make_result(std::move(shape), std::move(out), op, {x},
                     [x, map = std::move(map), n_in](std::span<const double> g) {
                       std::vector<double> gx(n_in, 0.0);
                       for (std::size_t i = 0; i < map.size(); ++i) gx[map[i]] += g[i];
                       accumulate_grad(x, gx);
                     });
}

Tensor unfold_temporal(const Tensor& x, std::size_t tau, std::size_t dilation) {
  const std::string op = "unfold_temporal";
  check_rank(op, x, 4, "input");
  if (tau == 0 || tau % 2 == 0) shape_fail(op, "window size must be odd, got " + std::to_string(tau));
  if (dilation == 0) shape_fail(op, "dilation must be >= 1");
  check_finite(op, x);
  const std::size_t N = x.dim(0), C = x.dim(1), T = x.dim(2), V = x.dim(3);
  const long half = static_cast<long>(tau - 1) / 2;
  auto X = x.data();
  std::vector<double> out(N * C * T * tau * V, 0.0);
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    for (std::size_t t = 0; t < T; ++t) {
      double* dst = out.data() + (nc * T + t) * tau * V;
      for (std::size_t i = 0; i < tau; ++i) {
        const long src_t = static_cast<long>(t) + static_cast<long>(dilation) * (static_cast<long>(i) - half);
        if (src_t < 0 || src_t >= static_cast<long>(T)) continue;
        std::copy_n(X.data() + (nc * T + static_cast<std::size_t>(src_t)) * V, V, dst + i * V);
      }
    }
  }
  return make_result(
      {N, C, T, tau * V}, std::move(out), op, {x},
      [x, N, C, T, V, tau, dilation, half](std::span<const double> g) {
        std::vector<double> gx(x.numel(), 0.0);
        for (std::size_t nc = 0; nc < N * C; ++nc) {
          for (std::size_t t = 0; t < T; ++t) {
            const double* src = g.data() + (nc * T + t) * tau * V;
            for (std::size_t i = 0; i < tau; ++i) {
              const long src_t = static_cast<long>(t) + static_cast<long>(dilation) * (static_cast<long>(i) - half);
              if (src_t < 0 || src_t >= static_cast<long>(T)) continue;
              double* dst = gx.data() + (nc * T + static_cast<std::size_t>(src_t)) * V;
              for (std::size_t v = 0; v < V; ++v) dst[v] += src[i * V + v];
            }
          }
        }
        accumulate_grad(x, gx);
      });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  const std::string op = "softmax_cross_entropy";
  check_rank(op, logits, 2, "logits");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  if (labels.size() != N) {
    shape_fail(op, std::to_string(labels.size()) + " labels for logits " + shape_str(logits.shape()));
  }
  check_finite(op, logits);
  auto L = logits.data();
  std::vector<double> prob(N * K);
  double loss = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    if (labels[n] >= K) {
      shape_fail(op, "label " + std::to_string(labels[n]) + " out of range for " +
                         std::to_string(K) + " classes");
    }
    const double* row = L.data() + n * K;
    const double mx = *std::max_element(row, row + K);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - mx);
    for (std::size_t k = 0; k < K; ++k) prob[n * K + k] = std::exp(row[k] - mx) / z;
    loss += -(row[labels[n]] - mx - std::log(z));
  }
  loss /= static_cast<double>(N);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return make_result({1}, {loss}, op, {logits},
                     [logits, prob = std::move(prob), lab = std::move(lab), N, K](std::span<const double> g) {
                       std::vector<double> gl(prob);
                       for (std::size_t n = 0; n < N; ++n) gl[n * K + lab[n]] -= 1.0;
                       const double f = g[0] / static_cast<double>(N);
                       for (double& v : gl) v *= f;
                       accumulate_grad(logits, gl);
                     });
}

}  // namespace gaitgcn
