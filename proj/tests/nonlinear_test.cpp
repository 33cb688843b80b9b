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

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

namespace qmpc {
namespace {

using testing::run_reveal;
using testing::uniform;
using Ins = std::vector<RssShare>;

constexpr FxpType kLow = FxpType::low();
constexpr FxpType kHigh = FxpType::high();

template <typename F>
std::vector<double> secure_unary(const std::vector<double>& v, Shape shape,
                                 FxpType t, F&& fn, FxpType out_t) {
  Session s;
  const auto r = run_reveal(s, {encode(v, std::move(shape), t)}, t,
                            [&](Party& p, Ins& in) { return fn(p, in[0]); });
  return decode(r, out_t);
}

template <typename F>
std::vector<double> secure_unary(const std::vector<double>& v, FxpType t,
                                 F&& fn) {
  return secure_unary(v, Shape{v.size()}, t, fn, t);
}

std::vector<double> oracle_of(const oracle::Tensor& t) {
  return oracle::to_real(t);
}

// ---------------------------------------------------------------- gelu_quad

TEST(GeluQuad, KnownPoints) {
  const auto r = secure_unary({0.0, 2.0, -2.0}, kLow,
                              [](Party& p, const RssShare& x) {
                                return gelu_quad(p, x);
                              });
  EXPECT_EQ(r[0], 0.5);
  EXPECT_EQ(r[1], 1.5);
  EXPECT_EQ(r[2], 0.5);
}

TEST(GeluQuad, MatchesOracleWithinOneUlp) {
  const auto v = uniform(10000, -4, 4);
  const auto sec = secure_unary(v, kLow, [](Party& p, const RssShare& x) {
    return gelu_quad(p, x);
  });
  const auto orc = oracle_of(oracle::gelu_quad(oracle::from_real(v, {v.size()}, kLow)));
  EXPECT_LE(oracle::max_ulp(sec, orc, kLow), 1.0);
  std::vector<double> poly;
  for (double x : decode(encode(v, kLow), kLow)) poly.push_back(oracle::ref::gelu_quad(x));
  EXPECT_LE(oracle::max_ulp(sec, poly, kLow), 2.0);
}

TEST(GeluQuad, CostsOneMulAndOneTrunc) {
  Session s;
  run_reveal(s, {RingTensor(Shape{10}, 32)}, kLow,
             [](Party& p, Ins& in) { return gelu_quad(p, in[0]); });
  EXPECT_EQ(s.stats().rounds, 3u);
}

// ---------------------------------------------------------------- gelu_poly

TEST(GeluPoly, BranchEndpoints) {
  const auto r = secure_unary({-5.0, 4.0, 0.0, -100.0, 50.0}, kHigh,
                              [](Party& p, const RssShare& x) {
                                return gelu_poly(p, x);
                              });
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 4.0);
  EXPECT_NEAR(r[2], params::kGeluF1A0, 4 * kHigh.ulp());
  EXPECT_EQ(r[3], 0.0);
  EXPECT_EQ(r[4], 50.0);
}

TEST(GeluPoly, MatchesOracleAndReference) {
  const auto v = uniform(5000, -6, 6);
  const auto sec = secure_unary(v, kHigh, [](Party& p, const RssShare& x) {
    return gelu_poly(p, x);
  });
  const auto orc =
      oracle_of(oracle::gelu_poly(oracle::from_real(v, {v.size()}, kHigh)));
  const double ulps = oracle::max_ulp(sec, orc, kHigh);
  RecordProperty("max_ulp_vs_oracle", std::to_string(ulps));
  EXPECT_LE(ulps, oracle::slack("gelu_poly"));
  std::vector<double> ref, exact;
  for (double x : v) {
    ref.push_back(oracle::ref::gelu_poly(x));
    exact.push_back(oracle::ref::gelu(x));
  }
  EXPECT_LE(oracle::metrics(sec, ref).max_abs, 1e-3);
  // The spline itself deviates from GeLU by just under 0.02.
  EXPECT_LE(oracle::metrics(sec, exact).max_abs, 0.021);
}

TEST(GeluPoly, PiecesAgreeAtBreakpoints) {
  const auto& c = params::kGeluF0;
  auto f0 = [&](double x) { return ((c[3] * x + c[2]) * x + c[1]) * x + c[0]; };
  auto f1 = [](double x) {
    const double u = x * x;
    return ((params::kGeluF1A6 * u + params::kGeluF1A4) * u +
            params::kGeluF1A2) * u + params::kGeluF1A1 * x + params::kGeluF1A0;
  };
  EXPECT_LE(std::abs(f0(-4.0) - 0.0), 0.02);
  EXPECT_LE(std::abs(f0(-1.95) - f1(-1.95)), 0.02);
  EXPECT_LE(std::abs(f1(3.0) - 3.0), 0.02);
}

TEST(GeluPoly, DiffersFromQuadOnNegatives) {
  const std::vector<double> v{-3.0, -2.0, -1.0};
  const auto q = secure_unary(v, kLow, [](Party& p, const RssShare& x) {
    return gelu_quad(p, x);
  });
  const auto g = secure_unary(v, kHigh, [](Party& p, const RssShare& x) {
    return gelu_poly(p, x);
  });
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_GT(std::abs(q[i] - g[i]), 0.05);
}

// ---------------------------------------------------------------- exp_neg

TEST(ExpNeg, KnownPoints) {
  const auto r = secure_unary({-20.0, 0.0, -1.0, -14.5, -1000.0}, kHigh,
                              [](Party& p, const RssShare& x) {
                                return exp_neg(p, x);
                              });
  EXPECT_EQ(r[0], 0.0);
  EXPECT_NEAR(r[1], 1.0, 2 * kHigh.ulp());
  EXPECT_NEAR(r[2], 0.3610, 0.002);
  EXPECT_EQ(r[3], 0.0);
  EXPECT_EQ(r[4], 0.0);
}

TEST(ExpNeg, DenseGridAgainstExactPowerAndTrueExp) {
  std::vector<double> v;
  for (int i = 0; i <= 1400; ++i) v.push_back(-0.01 * i);
  const auto sec = secure_unary(v, kHigh, [](Party& p, const RssShare& x) {
    return exp_neg(p, x);
  });
  const auto xs = decode(encode(v, kHigh), kHigh);
  std::vector<double> exact, truth;
  for (double x : xs) {
    exact.push_back(oracle::ref::exp_approx(x));
    truth.push_back(std::exp(x));
  }
  EXPECT_LE(oracle::max_ulp(sec, exact, kHigh), 4.0);
  EXPECT_LE(oracle::metrics(exact, truth).max_abs, 0.01);
  const auto orc = oracle_of(oracle::exp_neg(oracle::from_real(v, {v.size()}, kHigh)));
  EXPECT_LE(oracle::max_ulp(sec, orc, kHigh), oracle::slack("exp"));
}

// ---------------------------------------------------------------- max

TEST(Max, Examples) {
  auto run = [](std::vector<double> v) {
    return secure_unary(v, Shape{1, v.size()}, kLow,
                        [](Party& p, const RssShare& x) { return max_last(p, x); },
                        kLow);
  };
  EXPECT_EQ(run({1, 2, 3})[0], 3.0);
  EXPECT_EQ(run({-2.5, -2.5, -2.5, -2.5})[0], -2.5);
  EXPECT_EQ(run({7})[0], 7.0);
}

TEST(Max, RandomRows) {
  const std::size_t rows = 1000, n = 7;
  const auto v = uniform(rows * n, -50, 50);
  const auto sec = secure_unary(v, Shape{rows, n}, kLow,
                                [](Party& p, const RssShare& x) {
                                  return max_last(p, x);
                                },
                                kLow);
  const auto orc = oracle_of(oracle::max_last(oracle::from_real(v, {rows, n}, kLow)));
  EXPECT_EQ(sec, orc);
}

TEST(Max, FlatVector) {
  const auto v = uniform(33, -10, 10);
  const auto sec = secure_unary(v, Shape{33}, kLow,
                                [](Party& p, const RssShare& x) {
                                  return max_vec(p, x);
                                },
                                kLow);
  const auto xs = decode(encode(v, kLow), kLow);
  EXPECT_EQ(sec[0], *std::max_element(xs.begin(), xs.end()));
}

// ---------------------------------------------------------------- recip

std::vector<double> log_uniform(std::size_t n, double lo_exp, double hi_exp) {
  auto e = uniform(n, lo_exp, hi_exp);
  for (auto& x : e) x = std::exp2(x);
  return e;
}

TEST(Recip, KnownPoints) {
  const auto r = secure_unary({1.0, 4.0, 0.125}, kHigh,
                              [](Party& p, const RssShare& x) { return recip(p, x); });
  EXPECT_NEAR(r[0], 1.0, std::ldexp(1.0, -10));
  EXPECT_NEAR(r[1], 0.25, 0.25 * 2.5e-4);
  EXPECT_NEAR(r[2], 8.0, 8.0 * std::ldexp(1.0, -10));
}

TEST(Recip, RelativeErrorOverDomain) {
  auto v = log_uniform(3000, -10, 14);
  const auto sec = secure_unary(v, kHigh, [](Party& p, const RssShare& x) {
    return recip(p, x);
  });
  const auto xs = decode(encode(v, kHigh), kHigh);
  double worst_rel_small = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double want = 1.0 / xs[i];
    const double err = std::abs(sec[i] - want);
    // Values below 2^-8 have fewer than 10 significant bits at 18 fraction
    // bits, so the relative bound turns into an absolute one there.
    ASSERT_LE(err, std::max(want * std::ldexp(1.0, -10), 4 * kHigh.ulp()))
        << "x=" << xs[i];
    if (xs[i] <= 256) worst_rel_small = std::max(worst_rel_small, err / want);
  }
  EXPECT_LE(worst_rel_small, std::ldexp(1.0, -10));
  const auto orc = oracle_of(oracle::recip(oracle::from_real(v, {v.size()}, kHigh)));
  EXPECT_LE(oracle::max_scaled_ulp(sec, orc, kHigh), oracle::slack("recip"));
}

// ---------------------------------------------------------------- rsqrt

TEST(Rsqrt, KnownPoints) {
  const auto r = secure_unary({1.0, 4.0, 0.25}, kHigh,
                              [](Party& p, const RssShare& x) { return rsqrt(p, x); });
  EXPECT_NEAR(r[0], 1.0, std::ldexp(1.0, -8));
  EXPECT_NEAR(r[1], 0.5, 0.5 * std::ldexp(1.0, -8));
  EXPECT_NEAR(r[2], 2.0, 2.0 * std::ldexp(1.0, -8));
}

TEST(Rsqrt, RelativeErrorOverDomain) {
  auto v = log_uniform(3000, -10, 14);
  const auto sec = secure_unary(v, kHigh, [](Party& p, const RssShare& x) {
    return rsqrt(p, x);
  });
  const auto xs = decode(encode(v, kHigh), kHigh);
  double worst = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double want = 1.0 / std::sqrt(xs[i]);
    worst = std::max(worst, std::abs(sec[i] - want) / want);
  }
  EXPECT_LE(worst, std::ldexp(1.0, -8));
  const auto orc = oracle_of(oracle::rsqrt(oracle::from_real(v, {v.size()}, kHigh)));
  EXPECT_LE(oracle::max_scaled_ulp(sec, orc, kHigh), oracle::slack("rsqrt"));
}

// ---------------------------------------------------------------- softmax

std::vector<double> secure_softmax(const std::vector<double>& v, std::size_t rows,
                                   std::size_t n) {
  return secure_unary(v, Shape{rows, n}, kLow,
                      [](Party& p, const RssShare& x) { return softmax(p, x); },
                      kLow);
}

TEST(Softmax, UniformRow) {
  for (std::size_t n : {4u, 10u, 16u}) {
    const auto r = secure_softmax(std::vector<double>(n, 0.75), 1, n);
    for (double y : r) EXPECT_NEAR(y, 1.0 / n, 2 * kLow.ulp()) << n;
  }
}

TEST(Softmax, DominantEntry) {
  std::vector<double> v(10, -3.0);
  v[4] = 17.0;
  const auto r = secure_softmax(v, 1, 10);
  EXPECT_NEAR(r[4], 1.0, 2 * kLow.ulp());
  for (std::size_t j = 0; j < 10; ++j)
    if (j != 4) {
      EXPECT_LE(r[j], kLow.ulp());
    }
}

TEST(Softmax, RowSumsAndOracle) {
  const std::size_t rows = 1000, n = 10;
  const auto v = uniform(rows * n, -4, 4);
  const auto sec = secure_softmax(v, rows, n);
  std::size_t tight = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_GE(sec[r * n + j], 0.0);
      s += sec[r * n + j];
    }
    // Every entry is rounded on its own, each within one output ulp.
    ASSERT_NEAR(s, 1.0, static_cast<double>(n + 1) * kLow.ulp()) << r;
    if (std::abs(s - 1.0) <= std::ldexp(1.0, -7)) ++tight;
  }
  RecordProperty("rows_within_2^-7", std::to_string(tight));
  EXPECT_GE(tight, rows * 9 / 10);
  const auto orc = oracle_of(oracle::softmax(oracle::from_real(v, {rows, n}, kLow)));
  EXPECT_LE(oracle::max_ulp(sec, orc, kLow), oracle::slack("softmax"));
  const auto xs = decode(encode(v, kLow), kLow);
  const auto approx = oracle::ref::softmax_approx(xs, n);
  const auto exact = oracle::ref::softmax(xs, n);
  const auto m_approx = oracle::metrics(sec, approx);
  const auto m_exact = oracle::metrics(sec, exact);
  RecordProperty("max_abs_vs_power_softmax", std::to_string(m_approx.max_abs));
  RecordProperty("max_abs_vs_exact_softmax", std::to_string(m_exact.max_abs));
  std::printf("softmax max_abs: vs power-exp %.5f, vs exact %.5f\n",
              m_approx.max_abs, m_exact.max_abs);
  EXPECT_LE(m_approx.max_abs, 0.01);
}

TEST(Softmax, PhasesIncludeCasts) {
  Session s;
  run_reveal(s, {encode(uniform(20, -1, 1), Shape{2, 10}, kLow)}, kLow,
             [](Party& p, Ins& in) { return softmax(p, in[0]); });
  const auto st = s.stats();
  EXPECT_GT(st.bytes_in_phase("upcast"), 0u);
  // The output cast truncates in the 64-bit ring: 6 words per element.
  EXPECT_EQ(st.bytes_in_phase("downcast"), 20u * 6 * 8);
  EXPECT_GT(st.bytes_in_phase("exp"), 0u);
  EXPECT_GT(st.bytes_in_phase("max"), 0u);
}

// ---------------------------------------------------------------- layernorm

std::vector<double> secure_layernorm(const std::vector<double>& v, std::size_t rows,
                                     std::size_t n, const std::vector<double>& g,
                                     const std::vector<double>& b) {
  Session s;
  const auto sx = share(encode(v, Shape{rows, n}, kLow), kLow, s.client_rng());
  const auto sg = share(encode(g, Shape{n}, kHigh), kHigh, s.client_rng());
  const auto sb = share(encode(b, Shape{n}, kHigh), kHigh, s.client_rng());
  auto out = s.run([&](Party& p) {
    return layernorm(p, sx[p.id()], sg[p.id()], sb[p.id()]);
  });
  return decode(reveal(out), kLow);
}

TEST(LayerNorm, ConstantRowGivesBias) {
  const std::size_t n = 8;
  std::vector<double> b(n);
  for (std::size_t j = 0; j < n; ++j) b[j] = 0.25 * static_cast<double>(j) - 1;
  const auto r = secure_layernorm(std::vector<double>(n, 3.5), 1, n,
                                  std::vector<double>(n, 1.0), b);
  for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(r[j], b[j], 2 * kLow.ulp());
}

TEST(LayerNorm, TwoPointRow) {
  const auto r = secure_layernorm({-1.0, 1.0}, 1, 2, {1.0, 1.0}, {0.0, 0.0});
  EXPECT_NEAR(r[0], -1.0, 0.01);
  EXPECT_NEAR(r[1], 1.0, 0.01);
}

TEST(LayerNorm, RandomRowsMatchFloatAndOracle) {
  const std::size_t rows = 64, n = 64;
  const auto v = uniform(rows * n, -3, 3);
  const auto g = uniform(n, 0.5, 1.5);
  const auto b = uniform(n, -0.5, 0.5);
  const auto sec = secure_layernorm(v, rows, n, g, b);
  const auto xs = decode(encode(v, kLow), kLow);
  const auto gs = decode(encode(g, kHigh), kHigh);
  const auto bs = decode(encode(b, kHigh), kHigh);
  const auto ref = oracle::ref::layernorm(xs, n, gs, bs);
  EXPECT_LE(oracle::metrics(sec, ref).max_abs, 0.02);
  const auto orc = oracle_of(oracle::layernorm(oracle::from_real(v, {rows, n}, kLow),
                                               oracle::from_real(g, {n}, kHigh),
                                               oracle::from_real(b, {n}, kHigh)));
  EXPECT_LE(oracle::max_ulp(sec, orc, kLow), oracle::slack("layernorm"));
  // Row statistics with unit scale and zero shift.
  const auto unit = secure_layernorm(v, rows, n, std::vector<double>(n, 1.0),
                                     std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += unit[r * n + j];
    EXPECT_LE(std::abs(mu / n), std::ldexp(1.0, -6));
  }
}

}  // namespace
}  // namespace qmpc
