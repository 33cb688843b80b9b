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

#include <cstdarg>
#include <mutex>

#include "qmpc/bench.hpp"

// Property checks shared by the acceptance runner and `qmpc_cli selftest`.
namespace qmpc::checks {

using bench::Check;

struct Sizes {
  std::size_t samples = 10000;
  std::size_t upcast_masks = 100;
  std::size_t softmax_inputs = 1000;

  static Sizes full() { return {}; }
  static Sizes quick() { return {1000, 10, 100}; }
};

// Pinned tolerances.
inline constexpr double kChiSquaredCritical = 310.457;  // df 255, alpha 0.01
inline constexpr double kSoftmaxSumTol = 0.0078125;     // 2^-7
inline constexpr double kSoftmaxMaxAbs = 0.01;
inline constexpr double kExpVsTrue = 0.01;
inline constexpr int kExpUlps = 4;
inline constexpr int kGeluQuadUlps = 2;
inline constexpr int kGeluPolyUlps = 4;

namespace detail {

inline std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

template <typename F>
auto run_shared(Session& s, const std::vector<RingTensor>& inputs, FxpType t, F&& fn) {
  std::vector<std::array<RssShare, kParties>> shared;
  for (const auto& in : inputs) shared.push_back(share(in, t, s.client_rng()));
  return s.run([&](Party& p) {
    std::vector<RssShare> mine;
    for (const auto& sh : shared) mine.push_back(sh[p.id()]);
    return fn(p, mine);
  });
}

template <typename F>
RingTensor open(Session& s, const std::vector<RingTensor>& inputs, FxpType t, F&& fn) {
  return reveal(run_shared(s, inputs, t, fn));
}

inline RingTensor words(std::mt19937_64& rng, std::size_t n, int width) {
  RingTensor t(Shape{n}, width);
  for (std::size_t i = 0; i < n; ++i) t.set(i, rng() & ring_mask(width));
  return t;
}

// Signed words uniform in [-bound, bound).
inline RingTensor bounded(std::mt19937_64& rng, std::size_t n, int width, std::int64_t bound) {
  std::uniform_int_distribution<std::int64_t> d(-bound, bound - 1);
  RingTensor t(Shape{n}, width);
  for (std::size_t i = 0; i < n; ++i) t.set(i, from_signed(d(rng), width));
  return t;
}

inline RingTensor range(std::int64_t lo, std::int64_t hi, int width, std::size_t repeat = 1) {
  RingTensor t(Shape{static_cast<std::size_t>(hi - lo) * repeat}, width);
  std::size_t k = 0;
  for (std::int64_t v = lo; v < hi; ++v)
    for (std::size_t r = 0; r < repeat; ++r) t.set(k++, from_signed(v, width));
  return t;
}

inline RingTensor reals(const std::vector<double>& v, FxpType t) { return encode(v, t); }

using Clock = std::chrono::steady_clock;
using bench::detail::seconds_since;

}  // namespace detail

/// UpCast l=8 -> l'=16 over every x in [-2^6, 2^6) with `upcast_masks` fresh
/// masks each: exact output, 3 rounds, under 10 s.
inline Check upcast_exactness(const Sizes& z, std::uint64_t seed) {
  const FxpType from{8, 2}, to{16, 6};
  const auto t0 = detail::Clock::now();
  Session s(SessionOptions{.seed = seed});
  const RingTensor x = detail::range(-64, 64, 8, z.upcast_masks);
  const RingTensor r = detail::open(s, {x}, from, [&](Party& p, auto& in) {
    return upcast(p, in[0], to);
  });
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (r.signed_at(i) != x.signed_at(i) * 16) ++wrong;
  const auto rounds = s.stats().rounds;
  const double secs = detail::seconds_since(t0);
  return {"upcast_exactness", wrong == 0 && rounds == 3 && secs < 10,
          static_cast<double>(wrong),
          detail::fmt("128 values x %zu masks: %zu mismatches, %llu rounds, %.2f s", z.upcast_masks,
                      wrong, static_cast<unsigned long long>(rounds), secs)};
}

/// Measured upcast bits per element at 32 -> 64 against the implemented schedule.
inline Check upcast_communication(std::uint64_t seed) {
  const std::size_t n = 1000;
  std::mt19937_64 rng(seed);
  Session s(SessionOptions{.seed = seed});
  const RingTensor x = detail::bounded(rng, n, 32, std::int64_t{1} << 30);
  detail::open(s, {x}, FxpType::low(), [&](Party& p, auto& in) {
    return upcast(p, in[0], FxpType::high());
  });
  const double bits = 8.0 * static_cast<double>(s.stats().total_bytes()) / n;
  const auto want = upcast_bits(32, 64);
  return {"upcast_communication",
          bits == static_cast<double>(want) && s.stats().rounds == 3, bits,
          detail::fmt("%.0f bits/element measured, schedule 4l'+l = %llu, reference 3l+l' = 160",
                      bits, static_cast<unsigned long long>(want))};
}

/// DownCast l=16,f=6 -> l'=8,f'=2, exhaustive: no communication, floor minus
/// a carry of at most 2 ulp.
inline Check downcast_exhaustive(std::uint64_t seed) {
  const FxpType from{16, 6}, to{8, 2};
  const auto t0 = detail::Clock::now();
  Session s(SessionOptions{.seed = seed});
  const RingTensor x = detail::range(-(1 << 15), 1 << 15, 16);
  const RingTensor r = detail::open(s, {x}, from, [&](Party& p, auto& in) {
    return downcast(p, in[0], to);
  });
  // Ring carry over every 16-bit word, and plain decoded error on the values
  // that fit the target with two ulp of headroom below.
  std::size_t bad_mod = 0, bad_plain = 0, in_range = 0, boundary_wraps = 0;
  std::int64_t worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::int64_t v = x.signed_at(i);
    if (((static_cast<std::uint64_t>(v >> 4) - r[i]) & 0xff) > 2) ++bad_mod;
    if (v < -(1 << 11) || v >= (1 << 11)) continue;
    const std::int64_t err = (v >> 4) - r.signed_at(i);
    if (v >= -(1 << 11) + 32) {
      ++in_range;
      if (err < 0 || err > 2) ++bad_plain;
      worst = std::max(worst, err);
    } else if (err < 0 || err > 2) {
      ++boundary_wraps;
    }
  }
  const auto st = s.stats();
  const double secs = detail::seconds_since(t0);
  return {"downcast_exhaustive",
          bad_mod == 0 && bad_plain == 0 && st.total_bytes() == 0 && st.rounds == 0 && secs < 10,
          static_cast<double>(worst),
          detail::fmt("worst %lld ulp over %zu in-range values, %zu ring-carry violations, %zu "
                      "wraps in the bottom 2 target ulps, %llu bytes, %llu rounds, %.2f s",
                      static_cast<long long>(worst), in_range, bad_mod, boundary_wraps,
                      static_cast<unsigned long long>(st.total_bytes()),
                      static_cast<unsigned long long>(st.rounds), secs)};
}

/// Linear operations and one multiplication open to the exact ring results.
inline Check rss_algebra(const Sizes& z, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::size_t wrong = 0;
  for (const FxpType t : {FxpType::low(), FxpType::high()}) {
    const int w = t.bits;
    const RingTensor a = detail::words(rng, z.samples, w), b = detail::words(rng, z.samples, w);
    const std::uint64_t k = rng() & ring_mask(w), c = rng() & ring_mask(w);
    Session s(SessionOptions{.seed = seed + static_cast<std::uint64_t>(w)});
    const auto out = detail::run_shared(s, {a, b}, t, [&](Party& p, auto& in) {
      const RssShare& x = in[0];
      const RssShare& y = in[1];
      return std::vector<RssShare>{add(x, y),          sub(x, y),         neg(x),
                                   mul_public(x, k),   add_const(x, c),   mul(p, x, y),
                                   add(mul_public(x, k), mul_public(y, c))};
    });
    const std::vector<RingTensor> want = {
        ring::add(a, b),          ring::sub(a, b),          ring::neg(a),
        ring::mul_scalar(a, k),   ring::add_scalar(a, c),   ring::mul(a, b),
        ring::add(ring::mul_scalar(a, k), ring::mul_scalar(b, c))};
    for (std::size_t j = 0; j < want.size(); ++j) {
      const RingTensor got = reveal({out[0][j], out[1][j], out[2][j]});
      for (std::size_t i = 0; i < got.size(); ++i)
        if (got[i] != want[j][i]) ++wrong;
    }
  }
  return {"rss_algebra", wrong == 0, static_cast<double>(wrong),
          detail::fmt("7 identities x %zu samples at l=32 and l=64: %zu mismatches", z.samples, wrong)};
}

/// Secure truncation is floor or floor + 1 ulp.
inline Check truncation(const Sizes& z, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::int64_t worst = 0;
  std::size_t bad = 0;
  for (const FxpType t : {FxpType::low(), FxpType::high()}) {
    const RingTensor x =
        detail::bounded(rng, z.samples, t.bits, std::int64_t{1} << (t.bits - 2));
    Session s(SessionOptions{.seed = seed});
    const RingTensor r = detail::open(s, {x}, t, [&](Party& p, auto& in) {
      return trunc(p, in[0], t.frac);
    });
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::int64_t d = r.signed_at(i) - (x.signed_at(i) >> t.frac);
      if (d < 0 || d > 1) ++bad;
      worst = std::max(worst, d < 0 ? -d : d);
    }
  }
  return {"truncation", bad == 0, static_cast<double>(worst),
          detail::fmt("%zu samples at l=32 and l=64: worst %lld ulp, %zu outside {0,1}", z.samples,
                      static_cast<long long>(worst), bad)};
}

/// Sign bit extraction: exhaustive at l=8, random at l=32.
inline Check msb_extraction(const Sizes& z, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Session s(SessionOptions{.seed = seed});
  auto count = [&](const RingTensor& x, FxpType t) {
    const auto out = detail::run_shared(s, {x}, t, [&](Party& p, auto& in) { return msb(p, in[0]); });
    const RingTensor b = reveal_bool(out);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (b[i] == ((x[i] >> (t.bits - 1)) & 1)) ++ok;
    return ok;
  };
  const std::size_t ok8 = count(detail::range(-128, 128, 8), FxpType{8, 2});
  const std::size_t ok32 = count(detail::words(rng, z.samples, 32), FxpType::low());
  return {"msb_extraction", ok8 == 256 && ok32 == z.samples,
          static_cast<double>(ok8 + ok32),
          detail::fmt("l=8: %zu/256, l=32: %zu/%zu", ok8, ok32, z.samples)};
}

/// exp_neg on [-14, 0] step 0.01 at fxp<64,18> against the exact value of
/// (1 + x/32)^32, that value against e^x, and exact zeros below -14.
inline Check exp_neg_grid(std::uint64_t seed) {
  const FxpType t = FxpType::high();
  std::vector<double> grid, below;
  for (int i = 0; i <= 1400; ++i) grid.push_back(-14.0 + 0.01 * i);
  for (int i = 1; i <= 600; ++i) below.push_back(-14.0 - 0.01 * i);
  Session s(SessionOptions{.seed = seed});
  const RingTensor x = detail::reals(grid, t), xb = detail::reals(below, t);
  const auto y = decode(detail::open(s, {x}, t, [](Party& p, auto& in) { return exp_neg(p, in[0]); }), t);
  const auto yb = decode(detail::open(s, {xb}, t, [](Party& p, auto& in) { return exp_neg(p, in[0]); }), t);
  const auto xs = decode(x, t);
  double worst_ulp = 0, worst_model = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long double model = std::pow(1.0L + static_cast<long double>(xs[i]) / 32.0L, 32);
    worst_ulp = std::max(worst_ulp, static_cast<double>(std::fabs(y[i] - model) / t.ulp()));
    worst_model = std::max(worst_model, static_cast<double>(std::fabs(model - std::exp(static_cast<long double>(xs[i])))));
  }
  std::size_t nonzero = 0;
  for (double v : yb)
    if (v != 0.0) ++nonzero;
  return {"exp_neg", worst_ulp <= kExpUlps && worst_model <= kExpVsTrue && nonzero == 0, worst_ulp,
          detail::fmt("secure vs (1+x/32)^32: %.2f ulp (tol %d); model vs e^x: %.5f (tol %.2f); "
                      "%zu nonzero below -14",
                      worst_ulp, kExpUlps, worst_model, kExpVsTrue, nonzero)};
}

/// Quadratic GeLU at fxp<32,8> against the exact polynomial.
inline Check gelu_quad_accuracy(const Sizes& z, std::uint64_t seed) {
  const FxpType t = FxpType::low();
  std::mt19937_64 rng(seed);
  auto v = bench::detail::uniform(rng, z.samples, -4, 4);
  v.push_back(0.0);
  Session s(SessionOptions{.seed = seed});
  const RingTensor x = detail::reals(v, t);
  const RingTensor r = detail::open(s, {x}, t, [](Party& p, auto& in) { return gelu_quad(p, in[0]); });
  const auto xs = decode(x, t), y = decode(r, t);
  double worst = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    worst = std::max(worst, std::fabs(y[i] - oracle::ref::gelu_quad(xs[i])) / t.ulp());
  const bool half = r[r.size() - 1] == 128;
  return {"gelu_quad", worst <= kGeluQuadUlps && half, worst,
          detail::fmt("%zu samples: worst %.2f ulp (tol %d); gelu_quad(0) word %llu (want 128)",
                      z.samples, worst, kGeluQuadUlps,
                      static_cast<unsigned long long>(r[r.size() - 1]))};
}

/// Piecewise GeLU branch values at fxp<64,18>.
inline Check gelu_poly_branches(std::uint64_t seed) {
  const FxpType t = FxpType::high();
  Session s(SessionOptions{.seed = seed});
  const RingTensor x = detail::reals({-5.0, 4.0, 0.0}, t);
  const auto y = decode(detail::open(s, {x}, t, [](Party& p, auto& in) { return gelu_poly(p, in[0]); }), t);
  const double c_err = std::fabs(y[2] - params::kGeluF1A0) / t.ulp();
  return {"gelu_poly", y[0] == 0.0 && y[1] == 4.0 && c_err <= kGeluPolyUlps, c_err,
          detail::fmt("gelu_poly(-5) = %.9g, gelu_poly(4) = %.9g, gelu_poly(0) off by %.2f ulp (tol %d)",
                      y[0], y[1], c_err, kGeluPolyUlps)};
}

struct SoftmaxStats {
  std::size_t rows = 0, bad_sum = 0, negative = 0, provable_violations = 0;
  double max_abs = 0, worst_sum_dev = 0;
};

/// Softmax on `inputs` random 8x10 tensors in [-4, 4] at fxp<32,8>.
inline SoftmaxStats softmax_stats(std::size_t inputs, std::uint64_t seed) {
  const FxpType t = FxpType::low();
  const std::size_t rows = inputs * 8, n = 10;
  std::mt19937_64 rng(seed);
  const auto v = bench::detail::uniform(rng, rows * n, -4, 4);
  Session s(SessionOptions{.seed = seed});
  const RingTensor x = encode(v, {rows, n}, t);
  const auto y = decode(detail::open(s, {x}, t, [](Party& p, auto& in) { return softmax(p, in[0]); }), t);
  const auto want = oracle::ref::softmax(decode(x, t), n);
  SoftmaxStats st;
  st.rows = rows;
  st.max_abs = oracle::metrics(y, want).max_abs;
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      sum += y[r * n + j];
      if (y[r * n + j] < 0) ++st.negative;
    }
    const double dev = std::fabs(sum - 1.0);
    st.worst_sum_dev = std::max(st.worst_sum_dev, dev);
    if (dev > kSoftmaxSumTol) ++st.bad_sum;
    if (dev > static_cast<double>(n + 1) * t.ulp()) ++st.provable_violations;
  }
  return st;
}

inline Check softmax_properties(const Sizes& z, std::uint64_t seed) {
  const SoftmaxStats st = softmax_stats(z.softmax_inputs, seed);
  return {"softmax",
          st.bad_sum == 0 && st.negative == 0 && st.max_abs <= kSoftmaxMaxAbs, st.max_abs,
          detail::fmt("%zu rows: %zu with |sum-1| > 2^-7 (worst %.5f), %zu negative entries, "
                      "max-abs vs float %.5f (tol %.2f)",
                      st.rows, st.bad_sum, st.worst_sum_dev, st.negative, st.max_abs,
                      kSoftmaxMaxAbs)};
}

/// The sample softmax DAG gains one upcast and one downcast, validates, and
/// recompiling changes nothing.
inline Check graph_compiler(const std::string& samples_dir) {
  const graph::Graph g = graph::load_graph(samples_dir + "/softmax_dag.json");
  const graph::PrecisionMap map = graph::PrecisionMap::quantized();
  const graph::Graph c = graph::compile(g, map);
  const std::size_t up = c.count("upcast") - g.count("upcast");
  const std::size_t down = c.count("downcast") - g.count("downcast");
  const bool valid = graph::is_valid(c);
  const bool idem = graph::dump(graph::compile(c, map)) == graph::dump(c);
  return {"graph_compiler", up == 1 && down == 1 && valid && idem,
          static_cast<double>(up + down),
          detail::fmt("+%zu upcast, +%zu downcast, valid %s, idempotent %s", up, down,
                      valid ? "yes" : "no", idem ? "yes" : "no")};
}

/// Toy block accuracy and communication ratio, plus exact halving of the
/// dot-product traffic on the 8x768x3072 matmul.
inline Check end_to_end_block(std::uint64_t seed) {
  const auto t0 = detail::Clock::now();
  bench::BlockParams bp;
  bp.seed = seed;
  const bench::Report blk = bench::bench_block(bp);
  const double max_abs = blk.results["max_abs_vs_oracle"].get<double>();
  const double ratio = blk.results["ratio"].get<double>();
  std::uint64_t dot[2] = {0, 0};
  for (int i = 0; i < 2; ++i) {
    bench::MatmulParams mp;
    mp.bits = i == 0 ? 32 : 64;
    mp.seed = seed;
    dot[i] = bench::bench_matmul(mp).comm.bytes_in_phase("mul");
  }
  const double secs = detail::seconds_since(t0);
  const bool half = 2 * dot[0] == dot[1];
  return {"end_to_end_block",
          max_abs <= bench::kBlockMaxAbs && ratio <= bench::kCommRatioTarget && half && secs < 300,
          ratio,
          detail::fmt("block max-abs vs oracle %.5f (tol 2^-5); comm ratio %.4f (target <= %.2f); "
                      "matmul dot bytes 32-bit %llu vs 64-bit %llu (%s); %.1f s",
                      max_abs, ratio, bench::kCommRatioTarget,
                      static_cast<unsigned long long>(dot[0]),
                      static_cast<unsigned long long>(dot[1]), half ? "exact half" : "not half",
                      secs)};
}

/// Chi-squared test on the low 8 bits of the values opened inside upcast,
/// with the secret held fixed at zero.
inline Check opened_value_uniformity(std::uint64_t seed) {
  const std::size_t n = 10000;
  const FxpType t = FxpType::low();
  Session s(SessionOptions{.seed = seed});
  std::mutex mu;
  RingTensor a0, a1;
  s.fabric().set_tap([&](int from, int to, const Bytes& b) {
    if (b.size() != 4 * n || from == 2 || to == 2) return;
    std::lock_guard lock(mu);
    (from == 0 ? a0 : a1) = unpack(b, Shape{n}, 32);
  });
  detail::open(s, {RingTensor(Shape{n}, 32)}, t, [](Party& p, auto& in) {
    return upcast(p, in[0], FxpType::high());
  });
  s.fabric().set_tap(nullptr);
  if (a0.size() != n || a1.size() != n)
    return {"opened_value_uniformity", false, 0, "opened values were not observed"};
  const RingTensor y = ring::add(a0, a1);
  std::array<double, 256> hist{};
  for (std::size_t i = 0; i < n; ++i) hist[y[i] & 0xff] += 1;
  const double expect = static_cast<double>(n) / 256.0;
  double chi2 = 0;
  for (double h : hist) chi2 += (h - expect) * (h - expect) / expect;
  return {"opened_value_uniformity", chi2 <= kChiSquaredCritical, chi2,
          detail::fmt("chi^2 = %.2f over %zu opened values (critical %.3f, df 255, alpha 0.01)",
                      chi2, n, kChiSquaredCritical)};
}

/// The numbered acceptance criteria.
inline std::vector<Check> acceptance(const Sizes& z, std::uint64_t seed,
                                     const std::string& samples_dir) {
  return {upcast_exactness(z, seed),       upcast_communication(seed),
          downcast_exhaustive(seed),       rss_algebra(z, seed),
          truncation(z, seed),             msb_extraction(z, seed),
          exp_neg_grid(seed),              gelu_quad_accuracy(z, seed),
          gelu_poly_branches(seed),        softmax_properties(z, seed),
          graph_compiler(samples_dir),     end_to_end_block(seed),
          opened_value_uniformity(seed)};
}

/// Invariants that hold on every correct build, at reduced sizes.
inline std::vector<Check> selftest(std::uint64_t seed, const std::string& samples_dir) {
  const Sizes z = Sizes::quick();
  std::vector<Check> out = {upcast_exactness(z, seed), upcast_communication(seed),
                            downcast_exhaustive(seed), rss_algebra(z, seed),
                            truncation(z, seed),       msb_extraction(z, seed),
                            exp_neg_grid(seed),        gelu_quad_accuracy(z, seed),
                            gelu_poly_branches(seed),  graph_compiler(samples_dir),
                            opened_value_uniformity(seed)};

  const SoftmaxStats st = softmax_stats(z.softmax_inputs, seed);
  out.push_back({"softmax_nonnegative_and_sums", st.negative == 0 && st.provable_violations == 0,
                 st.worst_sum_dev,
                 detail::fmt("%zu rows: %zu negative, %zu sums beyond (n+1) ulp", st.rows,
                             st.negative, st.provable_violations)});

  bench::BlockParams bp;
  bp.config = {.d_model = 16, .n_heads = 2, .d_ff = 32, .seq_len = 4};
  bp.seed = seed;
  const double max_abs = bench::bench_block(bp).results["max_abs_vs_oracle"].get<double>();
  out.push_back({"small_block_vs_oracle", max_abs <= bench::kBlockMaxAbs, max_abs,
                 detail::fmt("max-abs %.5f (tol 2^-5)", max_abs)});

  bench::MatmulParams mp{.m = 4, .k = 32, .n = 16, .bits = 32, .net = "lan", .seed = seed};
  const auto m32 = bench::bench_matmul(mp);
  mp.bits = 64;
  const auto m64 = bench::bench_matmul(mp);
  const auto d32 = m32.comm.bytes_in_phase("mul"), d64 = m64.comm.bytes_in_phase("mul");
  out.push_back({"matmul_width_proportional", 2 * d32 == d64 && m32.ok() && m64.ok(),
                 static_cast<double>(d32) / static_cast<double>(d64),
                 detail::fmt("dot bytes %llu vs %llu", static_cast<unsigned long long>(d32),
                             static_cast<unsigned long long>(d64))});
  return out;
}

}  // namespace qmpc::checks
