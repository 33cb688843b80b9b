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

#include <array>
#include <bit>
#include <vector>

#include "qmpc/typecast.hpp"

namespace qmpc {

// Public constants shared by the secure kernels and the plaintext oracle.
namespace params {

// Quadratic GeLU: 0.125 x^2 + 0.25 x + 0.5.
inline constexpr double kQuadA = 0.125;
inline constexpr double kQuadB = 0.25;
inline constexpr double kQuadC = 0.5;

// Piecewise GeLU: 0 | f0 | f1 | x with breakpoints -4, -1.95, 3.
inline constexpr double kGeluLo = -4.0;
inline constexpr double kGeluMid = -1.95;
inline constexpr double kGeluHi = 3.0;
// f0 = c3 x^3 + c2 x^2 + c1 x + c0
inline constexpr std::array<double, 4> kGeluF0 = {
    -0.5054031199708174, -0.42226581151983866, -0.11807612951181953,
    -0.011034134030615728};
// f1 = a6 x^6 + a4 x^4 + a2 x^2 + 0.5 x + a0
inline constexpr double kGeluF1A6 = 0.0018067462606141187;
inline constexpr double kGeluF1A4 = -0.037688200365904236;
inline constexpr double kGeluF1A2 = 0.3603292692789629;
inline constexpr double kGeluF1A1 = 0.5;
inline constexpr double kGeluF1A0 = 0.008526321541038084;
// Extra fraction bits for polynomial coefficients.
inline constexpr int kCoefExtra = 8;

// exp(x) ~ (1 + x / 2^t)^(2^t) on [T, 0], 0 below T.
inline constexpr double kExpThreshold = -14.0;
inline constexpr int kExpIters = 5;

// Reciprocal on the normalized mantissa xn in [0.5, 1).
inline constexpr double kRecipSeedA = 48.0 / 17.0;
inline constexpr double kRecipSeedB = 32.0 / 17.0;
inline constexpr int kRecipIters = 3;

// Inverse square root on the normalized mantissa m in [0.25, 1).
inline constexpr double kRsqrtSeedA = 2.13;
inline constexpr double kRsqrtSeedB = 1.215;
inline constexpr int kRsqrtIters = 3;

inline constexpr double kLayerNormEps = 1e-5;

// Additive attention mask for disallowed positions.
inline constexpr double kMaskValue = -32.0;

}  // namespace params

namespace detail {

inline std::uint64_t enc(double v, const RssShare& like) {
  return from_signed(fxp_const(v, like.type.frac), like.width());
}

// floor(a / b) for b > 0.
constexpr int floor_div(int a, int b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

}  // namespace detail

/// 0.125 x^2 + 0.25 x + 0.5 with a single truncation:
/// y = trunc(x * (a x + b 2^f), 2f) + c. Requires |x (0.125 x + 0.25)| <
/// 2^{l-2-3f}, i.e. |x| < 21 at fxp<32,8>.
inline RssShare gelu_quad(Party& p, const RssShare& x) {
  PhaseScope ph(p, "gelu");
  const int f = x.type.frac;
  QMPC_ENFORCE(3 * f + 4 < x.width(), "gelu_quad: ", x.type.to_string(),
               " has no headroom for the fused product");
  const std::uint64_t a = detail::enc(params::kQuadA, x);
  const std::uint64_t b = from_signed(fxp_const(params::kQuadB, 2 * f), x.width());
  const RssShare inner = add_const(mul_public(x, a), b);
  const RssShare y = trunc(p, mul(p, x, inner), 2 * f);
  return add_const(y, detail::enc(params::kQuadC, x));
}

/// Boolean shares of x < c for every element and each public constant c,
/// evaluated with a single batched sign extraction.
inline std::vector<BoolShare> less_than_consts(Party& p, const RssShare& x,
                                               const std::vector<double>& cs) {
  std::vector<RssShare> diffs;
  for (double c : cs) diffs.push_back(add_const(x, detail::enc(-c, x)));
  return bsplit_flat(msb(p, concat_flat(diffs)),
                     std::vector<Shape>(cs.size(), x.shape()));
}

/// Piecewise GeLU: 0 (x < -4), cubic f0 (x < -1.95), degree-6 f1 (x <= 3),
/// x above. All branches are evaluated; the result is assembled as
/// f1 + b1 (f0 - f1) - b0 f0 + b2 (x - f1) from comparison bits b0, b1, b2.
/// The polynomials use the power basis x^2, x^3, x^4, x^6 and one final
/// truncation of the weighted sum, so power errors are scaled down by the
/// small high-order coefficients. Requires |x| < 16 at fxp<64,18>.
inline RssShare gelu_poly(Party& p, const RssShare& x) {
  PhaseScope ph(p, "gelu");
  const int f = x.type.frac;
  auto c = [&](double v) { return detail::enc(v, x); };

  std::vector<BoolShare> bits;
  {
    PhaseScope cmp(p, "compare");
    // b0: x < -4, b1: x < -1.95, b2: 3 - x < 0
    RssShare flipped = add_const(neg(x), c(params::kGeluHi));
    std::vector<RssShare> diffs{add_const(x, c(-params::kGeluLo)),
                                add_const(x, c(-params::kGeluMid)), flipped};
    bits = bsplit_flat(msb(p, concat_flat(diffs)),
                       std::vector<Shape>(3, x.shape()));
  }

  const auto& f0 = params::kGeluF0;
  const RssShare x2 = mul_trunc(p, x, x);
  const auto r = mul_trunc_many(p, {x2, x2}, {x2, x});
  const RssShare& x4 = r[0];
  const RssShare& x3 = r[1];
  const RssShare x6 = mul_trunc(p, x4, x2);

  // Coefficients carry kCoefExtra more fraction bits than x.
  auto term = [&](const RssShare& v, double k) {
    return mul_public(v, from_signed(fxp_const(k, f + params::kCoefExtra),
                                     x.width()));
  };
  const RssShare s0 = add(add(term(x3, f0[3]), term(x2, f0[2])), term(x, f0[1]));
  const RssShare s1 =
      add(add(add(term(x6, params::kGeluF1A6), term(x4, params::kGeluF1A4)),
              term(x2, params::kGeluF1A2)),
          term(x, params::kGeluF1A1));
  const auto polys = trunc_many(p, {s0, s1}, f + params::kCoefExtra);
  const RssShare p0 = add_const(polys[0], c(f0[0]));
  const RssShare p1 = add_const(polys[1], c(params::kGeluF1A0));

  PhaseScope sel(p, "select");
  auto inj = split_flat(bit_inject(p, bconcat_flat(bits), x.type),
                        std::vector<Shape>(3, x.shape()));
  auto prods = mul_many(p, {inj[1], inj[0], inj[2]},
                        {sub(p0, p1), p0, sub(x, p1)});
  return add(sub(add(p1, prods[0]), prods[1]), prods[2]);
}

/// (1 + x / 2^t)^(2^t) for T <= x <= 0 and exactly 0 where `below` is set.
/// The value 1 + x / 2^t is formed exactly at f + t fraction bits, squared t
/// times with truncation back to f + t bits, and the last truncation also
/// returns to f bits. Requires |x| < 2^{l/2 - 2 - f - t} in real terms.
/// `below` may come from a narrower copy of x.
inline RssShare exp_neg(Party& p, const RssShare& x, const BoolShare& below) {
  PhaseScope ph(p, "exp");
  const int f = x.type.frac;
  const int t = params::kExpIters;
  const int s = f + t;
  QMPC_ENFORCE(2 * s + 4 <= x.width(), "exp_neg: ", x.type.to_string(),
               " too narrow for the internal scale");
  QMPC_ENFORCE(below.shape() == x.shape(), "exp_neg: clamp bits shape");

  const FxpType inner{x.width(), s};
  RssShare y = add_const(retype(x, inner), std::uint64_t{1} << s);
  for (int i = 0; i < t; ++i) {
    const int shift = i + 1 < t ? s : 2 * s - f;
    y = trunc(p, mul(p, y, y), shift);
  }
  y = retype(y, x.type);
  return sub(y, mul(p, bit_inject(p, below, x.type), y));
}

/// Boolean shares of x < T, the clamp point of exp_neg.
inline BoolShare exp_clamp_bits(Party& p, const RssShare& x) {
  PhaseScope ph(p, "exp");
  return less_than_consts(p, x, {params::kExpThreshold})[0];
}

inline RssShare exp_neg(Party& p, const RssShare& x) {
  return exp_neg(p, x, exp_clamp_bits(p, x));
}

/// Row-wise maximum over the last axis by a comparison tournament;
/// keeps the last axis with size 1.
inline RssShare max_last(Party& p, const RssShare& x) {
  PhaseScope ph(p, "max");
  QMPC_ENFORCE(!x.shape().empty() && x.shape().back() > 0,
               "max over an empty axis");
  RssShare cur = x;
  while (cur.shape().back() > 1) {
    const std::size_t n = cur.shape().back();
    const std::size_t h = n / 2;
    const RssShare a = slice_last(cur, 0, h);
    const RssShare b = slice_last(cur, h, 2 * h);
    const BoolShare lt = less_than(p, a, b);
    RssShare m = select(p, lt, b, a);
    if (n % 2) m = concat_last({m, slice_last(cur, 2 * h, n)});
    cur = m;
  }
  return cur;
}

/// Maximum of a flat vector.
inline RssShare max_vec(Party& p, const RssShare& x) {
  return max_last(p, reshape(x, Shape{1, x.size()}));
}

/// Arithmetic 0/1 shares of the one-hot highest set bit of a positive x,
/// for bit positions lo..hi (inclusive). Bits outside the window are not
/// represented, so callers must keep x inside it.
inline std::vector<RssShare> top_bit_onehot(Party& p, const RssShare& x,
                                            int lo, int hi) {
  PhaseScope ph(p, "normalize");
  const int l = x.width();
  QMPC_ENFORCE(0 <= lo && lo <= hi && hi < l - 1, "bad bit window");
  BoolShare o = a2b(p, x);
  // o_i = OR of bits i..l-1
  for (int s = 1; s < l; s <<= 1) o = bor_many(p, {o}, {bshr(o, s)})[0];
  const BoolShare onehot = bxor(o, bshr(o, 1));
  std::vector<BoolShare> window;
  for (int i = lo; i <= hi; ++i) window.push_back(bit_at(onehot, i));
  return split_flat(bit_inject(p, bconcat_flat(window), x.type),
                    std::vector<Shape>(window.size(), x.shape()));
}

namespace detail {

// sum_i bits[i] * 2^{exps[i]} with exps in [0, l-2].
inline RssShare weighted_sum(const std::vector<RssShare>& bits,
                             const std::vector<int>& exps) {
  RssShare acc = mul_public(bits[0], std::uint64_t{1} << exps[0]);
  for (std::size_t i = 1; i < bits.size(); ++i) {
    acc = add(acc, mul_public(bits[i], std::uint64_t{1} << exps[i]));
  }
  return acc;
}

}  // namespace detail

/// 1 / x for x in [2^-f, 2^f) (real terms), relative error limited by the
/// output precision. x is scaled by a power of two c to xn in [0.5, 1),
/// refined by Newton steps y <- y (2 - xn y) from a linear seed, and the
/// result rescaled by c. Callers that know the top bit of x lies in
/// [lo, hi] may pass that window; inputs outside it yield 0.
inline RssShare recip(Party& p, const RssShare& x, int lo = 0, int hi = -1) {
  PhaseScope ph(p, "recip");
  const int f = x.type.frac;
  const int top = std::min(2 * f - 1, x.width() - 3);
  if (hi < 0) hi = top;
  QMPC_ENFORCE(0 <= lo && lo <= hi && hi <= top, "recip: bad bit window [",
               lo, ", ", hi, "]");
  const auto bits = top_bit_onehot(p, x, lo, hi);
  std::vector<int> exps;
  for (int i = lo; i <= hi; ++i) exps.push_back(2 * f - i - 1);
  const RssShare c = detail::weighted_sum(bits, exps);

  const RssShare xn = mul_trunc(p, x, c);
  RssShare y = add_const(
      trunc(p, mul_public(xn, detail::enc(-params::kRecipSeedB, x)), f),
      detail::enc(params::kRecipSeedA, x));
  const std::uint64_t two = detail::enc(2.0, x);
  for (int i = 0; i < params::kRecipIters; ++i) {
    const RssShare e = add_const(neg(mul_trunc(p, xn, y)), two);
    y = mul_trunc(p, y, e);
  }
  return mul_trunc(p, y, c);
}

/// 1 / sqrt(x) for x in [2^-f, 2^f) (real terms). With the top bit at
/// position i, e = i - f + 1 and k = ceil(e / 2), m = x 2^-2k lies in
/// [0.25, 1); Newton steps y <- y (3 - m y^2) / 2 from a linear seed give
/// 1/sqrt(m), and the result is y 2^-k.
inline RssShare rsqrt(Party& p, const RssShare& x) {
  PhaseScope ph(p, "rsqrt");
  const int f = x.type.frac;
  const int top = std::min(2 * f - 1, x.width() - 3);
  const auto bits = top_bit_onehot(p, x, 0, top);
  std::vector<int> e1, e2;
  for (int i = 0; i <= top; ++i) {
    const int e = i - f + 1;
    const int k = -detail::floor_div(-e, 2);
    e1.push_back(f - 2 * k);
    e2.push_back(f - k);
  }
  const RssShare c1 = detail::weighted_sum(bits, e1);
  const RssShare c2 = detail::weighted_sum(bits, e2);

  const RssShare m = mul_trunc(p, x, c1);
  RssShare y = add_const(
      trunc(p, mul_public(m, detail::enc(-params::kRsqrtSeedB, x)), f),
      detail::enc(params::kRsqrtSeedA, x));
  const std::uint64_t three = detail::enc(3.0, x);
  for (int i = 0; i < params::kRsqrtIters; ++i) {
    const RssShare y2 = mul_trunc(p, y, y);
    const RssShare u = add_const(neg(mul_trunc(p, m, y2)), three);
    y = trunc(p, mul(p, y, u), f + 1);
  }
  return mul_trunc(p, y, c2);
}

/// Softmax over the last axis. The max and the exp clamp test run at the
/// input type; the exponential, sum and reciprocal run at `compute`. The
/// final product is truncated once, straight to the `out` scale, so no
/// entry drops below zero.
inline RssShare softmax(Party& p, const RssShare& x,
                        FxpType compute = FxpType::high(),
                        FxpType out = FxpType::low()) {
  PhaseScope ph(p, "softmax");
  const RssShare mx = max_last(p, x);
  RssShare d = sub(x, broadcast_to(mx, x.shape()));
  const BoolShare below = exp_clamp_bits(p, d);
  d = cast(p, d, compute);
  const RssShare e = exp_neg(p, d, below);
  // Every row holds an exact 1 at its max, so its sum lies in [1, n + 1).
  const int f = compute.frac;
  const int n = static_cast<int>(e.shape().back());
  const RssShare r =
      recip(p, sum_last(e), f, f + static_cast<int>(std::bit_width(
                                       static_cast<unsigned>(n))));
  const RssShare prod = mul(p, e, broadcast_to(r, e.shape()));
  if (out.bits < compute.bits && out.frac <= compute.frac) {
    PhaseScope dc(p, "downcast");
    const RssShare z = trunc(p, prod, 2 * f - out.frac);
    return RssShare{z.party, ring::reduce(z.lo, out.bits),
                    ring::reduce(z.hi, out.bits), out};
  }
  return cast(p, retype(trunc(p, prod, f), compute), out, Rounding::kTrunc);
}

/// (x - mean) / sqrt(var + eps) * g + b over the last axis. g and b have the
/// size of the last axis and the `compute` type. Squares are summed before
/// truncating, and d * r * g is truncated once; this needs
/// |(x - mean) r g| < 2^{l-2-3f} in real terms (256 at fxp<64,18>).
inline RssShare layernorm(Party& p, const RssShare& x, const RssShare& g,
                          const RssShare& b, double eps = params::kLayerNormEps,
                          FxpType compute = FxpType::high(),
                          FxpType out = FxpType::low()) {
  PhaseScope ph(p, "layernorm");
  QMPC_ENFORCE(g.type == compute && b.type == compute,
               "layernorm scale and bias must be ", compute.to_string());
  const RssShare xh = cast(p, x, compute);
  const int f = compute.frac;
  QMPC_ENFORCE(3 * f + 4 < compute.bits, "layernorm: ", compute.to_string(),
               " has no headroom for the fused product");
  const std::size_t n = xh.shape().back();
  const std::uint64_t inv_n = detail::enc(1.0 / static_cast<double>(n), xh);

  const RssShare mu = trunc(p, mul_public(sum_last(xh), inv_n), f);
  const RssShare d = sub(xh, broadcast_to(mu, xh.shape()));
  const RssShare ss = trunc(p, sum_last(mul(p, d, d)), f);
  RssShare var = trunc(p, mul_public(ss, inv_n), f);
  std::int64_t eps_int = fxp_const(eps, f);
  if (eps_int < 1) eps_int = 1;
  var = add_const(var, static_cast<std::uint64_t>(eps_int));
  const RssShare r = rsqrt(p, var);
  const RssShare rg =
      mul(p, broadcast_to(r, d.shape()), broadcast_to(g, d.shape()));
  const RssShare y = retype(trunc(p, mul(p, d, rg), 2 * f), compute);
  return cast(p, add(y, broadcast_to(b, y.shape())), out);
}

}  // namespace qmpc
