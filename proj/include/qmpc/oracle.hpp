// Copyright 2026 The qmpc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qmpc/nonlinear.hpp"

// Plaintext reference implementations. The fixed-point oracle evaluates every
// secure kernel step by step on signed integers with floor truncation; the
// float references give the mathematical targets.
namespace qmpc::oracle {

/// Signed fixed-point tensor: value v stands for v / 2^frac, wrapped to
/// type.bits.
struct Tensor {
  Shape shape;
  std::vector<std::int64_t> v;
  FxpType type;

  std::size_t size() const { return v.size(); }
};

inline std::int64_t wrap(std::int64_t x, int bits) {
  if (bits >= 64) return x;
  const auto u = static_cast<std::uint64_t>(x) << (64 - bits);
  return static_cast<std::int64_t>(u) >> (64 - bits);
}

inline std::int64_t wmul(std::int64_t a, std::int64_t b, int bits) {
  return wrap(static_cast<std::int64_t>(static_cast<std::uint64_t>(a) *
                                        static_cast<std::uint64_t>(b)),
              bits);
}

inline std::int64_t wadd(std::int64_t a, std::int64_t b, int bits) {
  return wrap(static_cast<std::int64_t>(static_cast<std::uint64_t>(a) +
                                        static_cast<std::uint64_t>(b)),
              bits);
}

inline std::int64_t fl(std::int64_t x, int k) { return x >> k; }

inline std::int64_t konst(double v, int frac) { return fxp_const(v, frac); }

inline Tensor from_ring(const RingTensor& r, FxpType t) {
  QMPC_ENFORCE(r.width() == t.bits, "oracle: width mismatch");
  Tensor out{r.shape(), std::vector<std::int64_t>(r.size()), t};
  for (std::size_t i = 0; i < r.size(); ++i) out.v[i] = r.signed_at(i);
  return out;
}

inline RingTensor to_ring(const Tensor& x) {
  RingTensor r(x.shape, x.type.bits);
  for (std::size_t i = 0; i < x.size(); ++i) r.set(i, from_signed(x.v[i], x.type.bits));
  return r;
}

inline Tensor from_real(const std::vector<double>& v, Shape shape, FxpType t) {
  return from_ring(encode(v, std::move(shape), t), t);
}

inline std::vector<double> to_real(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = std::ldexp(static_cast<double>(x.v[i]), -x.type.frac);
  return out;
}

template <typename F>
Tensor map(const Tensor& x, F&& fn) {
  Tensor out = x;
  for (auto& e : out.v) e = wrap(fn(e), x.type.bits);
  return out;
}

inline std::size_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

// --- structure ------------------------------------------------------------

inline Tensor broadcast(const Tensor& x, const Shape& to) {
  const RingTensor r = ring::broadcast_to(to_ring(x), to);
  return from_ring(r, x.type);
}

inline Tensor transpose(const Tensor& x) {
  QMPC_ENFORCE(x.shape.size() == 2, "oracle transpose needs a matrix");
  const std::size_t r = x.shape[0], c = x.shape[1];
  Tensor out{Shape{c, r}, std::vector<std::int64_t>(x.size()), x.type};
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.v[j * r + i] = x.v[i * c + j];
  return out;
}

inline Tensor reshape(Tensor x, Shape s) {
  QMPC_ENFORCE(numel(s) == x.size(), "oracle reshape size mismatch");
  x.shape = std::move(s);
  return x;
}

inline Tensor slice_last(const Tensor& x, std::size_t b, std::size_t e) {
  const std::size_t n = last_dim(x.shape);
  QMPC_ENFORCE(b < e && e <= n, "oracle slice out of range");
  const std::size_t rows = x.size() / n;
  Shape s = x.shape;
  s.back() = e - b;
  Tensor out{s, {}, x.type};
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = b; j < e; ++j) out.v.push_back(x.v[r * n + j]);
  return out;
}

inline Tensor concat_last(const std::vector<Tensor>& xs) {
  const std::size_t rows = xs.at(0).size() / last_dim(xs[0].shape);
  Shape s = xs[0].shape;
  std::size_t total = 0;
  for (const auto& x : xs) total += last_dim(x.shape);
  s.back() = total;
  Tensor out{s, {}, xs[0].type};
  for (std::size_t r = 0; r < rows; ++r)
    for (const auto& x : xs) {
      const std::size_t n = last_dim(x.shape);
      for (std::size_t j = 0; j < n; ++j) out.v.push_back(x.v[r * n + j]);
    }
  return out;
}

template <typename F>
Tensor reduce_last(const Tensor& x, F&& fn) {
  const std::size_t n = last_dim(x.shape);
  const std::size_t rows = x.size() / n;
  Shape s = x.shape.empty() ? Shape{1} : x.shape;
  s.back() = 1;
  Tensor out{s, std::vector<std::int64_t>(rows), x.type};
  for (std::size_t r = 0; r < rows; ++r) {
    std::int64_t acc = x.v[r * n];
    for (std::size_t j = 1; j < n; ++j) acc = fn(acc, x.v[r * n + j]);
    out.v[r] = acc;
  }
  return out;
}

inline Tensor sum_last(const Tensor& x) {
  const int b = x.type.bits;
  return reduce_last(x, [b](auto a, auto c) { return wadd(a, c, b); });
}

inline Tensor max_last(const Tensor& x) {
  return reduce_last(x, [](auto a, auto c) { return std::max(a, c); });
}

// --- arithmetic -------------------------------------------------------------

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, F&& fn) {
  const Shape s = ring::broadcast_shape(a.shape, b.shape);
  const Tensor x = a.shape == s ? a : broadcast(a, s);
  const Tensor y = b.shape == s ? b : broadcast(b, s);
  Tensor out{s, std::vector<std::int64_t>(x.size()), a.type};
  for (std::size_t i = 0; i < x.size(); ++i)
    out.v[i] = wrap(fn(x.v[i], y.v[i]), a.type.bits);
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  const int w = a.type.bits;
  return zip(a, b, [w](auto x, auto y) { return wadd(x, y, w); });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  const int w = a.type.bits;
  return zip(a, b, [w](auto x, auto y) { return wadd(x, -y, w); });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  const int w = a.type.bits, f = a.type.frac;
  return zip(a, b, [w, f](auto x, auto y) { return fl(wmul(x, y, w), f); });
}

inline Tensor scale(const Tensor& a, double factor) {
  const int w = a.type.bits, f = a.type.frac;
  const std::int64_t c = konst(factor, f);
  return map(a, [=](auto x) { return fl(wmul(x, c, w), f); });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  QMPC_ENFORCE(a.shape.size() == 2 && b.shape.size() == 2 &&
                   a.shape[1] == b.shape[0],
               "oracle matmul shape mismatch");
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  const int w = a.type.bits, f = a.type.frac;
  Tensor out{Shape{m, n}, std::vector<std::int64_t>(m * n), a.type};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      std::int64_t acc = 0;
      for (std::size_t t = 0; t < k; ++t)
        acc = wadd(acc, wmul(a.v[i * k + t], b.v[t * n + j], w), w);
      out.v[i * n + j] = wrap(fl(acc, f), w);
    }
  return out;
}

// --- casts ------------------------------------------------------------------

inline Tensor upcast(const Tensor& x, FxpType to) {
  const int t = to.frac - x.type.frac;
  Tensor out{x.shape, x.v, to};
  for (auto& e : out.v) e = wrap(e * (std::int64_t{1} << t), to.bits);
  return out;
}

inline Tensor downcast(const Tensor& x, FxpType to) {
  const int t = x.type.frac - to.frac;
  Tensor out{x.shape, x.v, to};
  for (auto& e : out.v) e = wrap(fl(e, t), to.bits);
  return out;
}

inline Tensor cast(const Tensor& x, FxpType to) {
  if (x.type == to) return x;
  if (to.frac >= x.type.frac && to.bits >= x.type.bits) return upcast(x, to);
  if (to.frac < x.type.frac && to.bits <= x.type.bits) return downcast(x, to);
  // Frac shrinks while the ring grows: floor first, then widen.
  return upcast(downcast(x, FxpType{x.type.bits, to.frac}), to);
}

// --- non-linear kernels -----------------------------------------------------

inline Tensor gelu_quad(const Tensor& x) {
  const int w = x.type.bits, f = x.type.frac;
  const std::int64_t a = konst(params::kQuadA, f);
  const std::int64_t b = konst(params::kQuadB, 2 * f);
  const std::int64_t c = konst(params::kQuadC, f);
  return map(x, [=](std::int64_t v) {
    const std::int64_t inner = wadd(wmul(a, v, w), b, w);
    return wadd(fl(wmul(v, inner, w), 2 * f), c, w);
  });
}

inline Tensor gelu_poly(const Tensor& x) {
  const int w = x.type.bits, f = x.type.frac;
  auto k = [f](double v) { return konst(v, f); };
  const auto& c0 = params::kGeluF0;
  return map(x, [&](std::int64_t v) {
    const bool b0 = wadd(v, k(-params::kGeluLo), w) < 0;
    const bool b1 = wadd(v, k(-params::kGeluMid), w) < 0;
    const bool b2 = wadd(k(params::kGeluHi), -v, w) < 0;
    auto mt = [&](std::int64_t a, std::int64_t b) { return fl(wmul(a, b, w), f); };
    const std::int64_t x2 = mt(v, v);
    const std::int64_t x4 = mt(x2, x2);
    const std::int64_t x3 = mt(x2, v);
    const std::int64_t x6 = mt(x4, x2);
    const int fc = f + params::kCoefExtra;
    auto kc = [fc](double c) { return konst(c, fc); };
    const std::int64_t s0 = wmul(x3, kc(c0[3]), w) + wmul(x2, kc(c0[2]), w) +
                            wmul(v, kc(c0[1]), w);
    const std::int64_t s1 =
        wmul(x6, kc(params::kGeluF1A6), w) + wmul(x4, kc(params::kGeluF1A4), w) +
        wmul(x2, kc(params::kGeluF1A2), w) + wmul(v, kc(params::kGeluF1A1), w);
    const std::int64_t p0 = fl(s0, fc) + k(c0[0]);
    const std::int64_t p1 = fl(s1, fc) + k(params::kGeluF1A0);
    if (b0) return std::int64_t{0};
    if (b1) return p0;
    if (b2) return v;
    return p1;
  });
}

inline Tensor exp_neg(const Tensor& x) {
  const int w = x.type.bits, f = x.type.frac;
  const int t = params::kExpIters, s = f + t;
  const std::int64_t thr = konst(params::kExpThreshold, f);
  return map(x, [=](std::int64_t v) {
    if (v < thr) return std::int64_t{0};
    std::int64_t y = (std::int64_t{1} << s) + v;
    for (int i = 0; i < t; ++i) y = fl(wmul(y, y, w), i + 1 < t ? s : 2 * s - f);
    return y;
  });
}

namespace detail {

inline int top_bit(std::int64_t v) {
  int i = -1;
  for (int b = 0; b < 63; ++b)
    if ((v >> b) & 1) i = b;
  return i;
}

}  // namespace detail

inline Tensor recip(const Tensor& x) {
  const int w = x.type.bits, f = x.type.frac;
  return map(x, [=](std::int64_t v) {
    const int i = detail::top_bit(v);
    QMPC_ENFORCE(i >= 0 && i <= 2 * f - 1, "oracle recip outside domain");
    const std::int64_t c = std::int64_t{1} << (2 * f - i - 1);
    const std::int64_t xn = fl(wmul(v, c, w), f);
    std::int64_t y = fl(wmul(xn, konst(-params::kRecipSeedB, f), w), f) +
                     konst(params::kRecipSeedA, f);
    for (int it = 0; it < params::kRecipIters; ++it) {
      const std::int64_t e = konst(2.0, f) - fl(wmul(xn, y, w), f);
      y = fl(wmul(y, e, w), f);
    }
    return fl(wmul(y, c, w), f);
  });
}

inline Tensor rsqrt(const Tensor& x) {
  const int w = x.type.bits, f = x.type.frac;
  return map(x, [=](std::int64_t v) {
    const int i = detail::top_bit(v);
    QMPC_ENFORCE(i >= 0 && i <= 2 * f - 1, "oracle rsqrt outside domain");
    const int e = i - f + 1;
    const int kk = static_cast<int>(std::ceil(e / 2.0));
    const std::int64_t c1 = std::int64_t{1} << (f - 2 * kk);
    const std::int64_t c2 = std::int64_t{1} << (f - kk);
    const std::int64_t m = fl(wmul(v, c1, w), f);
    std::int64_t y = fl(wmul(m, konst(-params::kRsqrtSeedB, f), w), f) +
                     konst(params::kRsqrtSeedA, f);
    for (int it = 0; it < params::kRsqrtIters; ++it) {
      const std::int64_t y2 = fl(wmul(y, y, w), f);
      const std::int64_t u = konst(3.0, f) - fl(wmul(m, y2, w), f);
      y = fl(wmul(y, u, w), f + 1);
    }
    return fl(wmul(y, c2, w), f);
  });
}

inline Tensor softmax(const Tensor& x, FxpType compute = FxpType::high(),
                      FxpType out = FxpType::low()) {
  Tensor d = sub(x, broadcast(max_last(x), x.shape));
  d = cast(d, compute);
  const Tensor e = exp_neg(d);
  const Tensor r = recip(sum_last(e));
  return cast(mul(e, broadcast(r, e.shape)), out);
}

inline Tensor layernorm(const Tensor& x, const Tensor& g, const Tensor& b,
                        double eps = params::kLayerNormEps,
                        FxpType compute = FxpType::high(),
                        FxpType out = FxpType::low()) {
  const Tensor xh = cast(x, compute);
  const int w = compute.bits, f = compute.frac;
  const std::int64_t inv_n =
      konst(1.0 / static_cast<double>(last_dim(xh.shape)), f);
  auto times_inv = [&](const Tensor& s) {
    return map(s, [&](std::int64_t v) { return fl(wmul(v, inv_n, w), f); });
  };
  const Tensor mu = times_inv(sum_last(xh));
  const Tensor d = sub(xh, broadcast(mu, xh.shape));
  std::int64_t eps_int = std::max<std::int64_t>(konst(eps, f), 1);
  // Raw products keep their doubled scale until the single truncation.
  auto raw_mul = [w](const Tensor& a, const Tensor& c) {
    Tensor o = a;
    for (std::size_t i = 0; i < o.v.size(); ++i) o.v[i] = wmul(a.v[i], c.v[i], w);
    return o;
  };
  Tensor ss = sum_last(raw_mul(d, d));
  for (auto& v : ss.v) v = fl(v, f);
  Tensor var = times_inv(ss);
  for (auto& v : var.v) v = wadd(v, eps_int, w);
  const Tensor r = rsqrt(var);
  Tensor y = raw_mul(d, raw_mul(broadcast(r, d.shape), broadcast(g, d.shape)));
  for (auto& v : y.v) v = fl(v, 2 * f);
  return cast(add(y, broadcast(b, y.shape)), out);
}

// --- float references -------------------------------------------------------

namespace ref {

inline double gelu_quad(double x) {
  return params::kQuadA * x * x + params::kQuadB * x + params::kQuadC;
}

inline double gelu_poly(double x) {
  const auto& c = params::kGeluF0;
  if (x < params::kGeluLo) return 0.0;
  if (x < params::kGeluMid) return ((c[3] * x + c[2]) * x + c[1]) * x + c[0];
  if (x <= params::kGeluHi) {
    const double u = x * x;
    return ((params::kGeluF1A6 * u + params::kGeluF1A4) * u + params::kGeluF1A2) *
               u +
           params::kGeluF1A1 * x + params::kGeluF1A0;
  }
  return x;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

// The clamped power approximation of exp, evaluated in long double.
inline double exp_approx(double x) {
  if (x < params::kExpThreshold) return 0.0;
  long double y = 1.0L + static_cast<long double>(x) / (1 << params::kExpIters);
  for (int i = 0; i < params::kExpIters; ++i) y *= y;
  return static_cast<double>(y);
}

// Row-wise softmax over rows of length n with exp replaced by `expf`.
template <typename E>
std::vector<double> softmax_with(const std::vector<double>& x, std::size_t n,
                                 E&& expf) {
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < x.size() / n; ++r) {
    double m = x[r * n];
    for (std::size_t j = 1; j < n; ++j) m = std::max(m, x[r * n + j]);
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) s += out[r * n + j] = expf(x[r * n + j] - m);
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] /= s;
  }
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& x, std::size_t n) {
  return softmax_with(x, n, [](double v) { return std::exp(v); });
}

inline std::vector<double> softmax_approx(const std::vector<double>& x,
                                          std::size_t n) {
  return softmax_with(x, n, exp_approx);
}

inline std::vector<double> layernorm(const std::vector<double>& x, std::size_t n,
                                     const std::vector<double>& g,
                                     const std::vector<double>& b,
                                     double eps = params::kLayerNormEps) {
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < x.size() / n; ++r) {
    double mu = 0, var = 0;
    for (std::size_t j = 0; j < n; ++j) mu += x[r * n + j];
    mu /= static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) var += (x[r * n + j] - mu) * (x[r * n + j] - mu);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j)
      out[r * n + j] = (x[r * n + j] - mu) * inv * g[j] + b[j];
  }
  return out;
}

}  // namespace ref

// --- metrics ----------------------------------------------------------------

struct Metrics {
  double max_abs = 0;
  double mean_abs = 0;
  double rel = 0;  // max |a - b| / |b| over entries with b != 0
};

inline Metrics metrics(const std::vector<double>& a, const std::vector<double>& b) {
  QMPC_ENFORCE(a.size() == b.size(), "metrics: size mismatch");
  Metrics m;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    m.max_abs = std::max(m.max_abs, d);
    m.mean_abs += d;
    if (b[i] != 0) m.rel = std::max(m.rel, d / std::abs(b[i]));
  }
  if (!a.empty()) m.mean_abs /= static_cast<double>(a.size());
  return m;
}

// Largest |a - b| in units of the last place of `t`.
inline double max_ulp(const std::vector<double>& a, const std::vector<double>& b,
                      FxpType t) {
  return metrics(a, b).max_abs / t.ulp();
}

/// Like max_ulp, but an error at a reference of magnitude m > 1 counts as
/// err / m. Suits kernels whose last step multiplies by a large public or
/// secret factor (recip, rsqrt) and so scales the absolute error with the
/// output.
inline double max_scaled_ulp(const std::vector<double>& a,
                             const std::vector<double>& b, FxpType t) {
  QMPC_ENFORCE(a.size() == b.size(), "size mismatch");
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max(1.0, std::abs(b[i]));
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst / t.ulp();
}

/// Secure-vs-oracle tolerance per kernel, in ulp of the output type. Each
/// probabilistic truncation contributes at most one ulp before any
/// amplification by later steps; the non-linear entries were calibrated
/// against the oracle over the test domains.
inline const std::map<std::string, int>& slack_table() {
  static const std::map<std::string, int> table = {
      {"trunc", 1},     {"matmul", 1},    {"mul", 1},       {"scale", 1},
      {"upcast", 0},    {"downcast", 2},  {"gelu_quad", 1}, {"gelu_poly", 8},
      {"exp", 4},       {"recip", 8},     {"rsqrt", 8},     {"max", 0},
      {"softmax", 4},   {"layernorm", 8},
  };
  return table;
}

inline int slack(const std::string& op) {
  const auto& t = slack_table();
  const auto it = t.find(op);
  return it == t.end() ? 2 : it->second;
}

}  // namespace qmpc::oracle
