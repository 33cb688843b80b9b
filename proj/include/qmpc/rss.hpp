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
#include <vector>

#include "qmpc/party.hpp"

namespace qmpc {

/// Party i's view of a 2-out-of-3 replicated sharing x = x0 + x1 + x2 mod 2^l:
/// lo = x_i, hi = x_{i+1}.
struct RssShare {
  int party = 0;
  RingTensor lo;
  RingTensor hi;
  FxpType type;

  const Shape& shape() const { return lo.shape(); }
  int width() const { return lo.width(); }
  std::size_t size() const { return lo.size(); }
};

/// Replicated XOR sharing of bit vectors; each element carries `width` bits.
struct BoolShare {
  int party = 0;
  RingTensor lo;
  RingTensor hi;

  const Shape& shape() const { return lo.shape(); }
  int width() const { return lo.width(); }
  std::size_t size() const { return lo.size(); }
};

// ---------------------------------------------------------------------------
// Sharing and reconstruction (input owner / output receiver side).

inline std::array<RssShare, kParties> share(const RingTensor& secret,
                                            FxpType t, Prf& rng) {
  t.validate();
  QMPC_ENFORCE(secret.width() == t.bits, "secret width ", secret.width(),
               " does not match ", t.to_string());
  const RingTensor x0 = rng.draw(secret.shape(), t.bits);
  const RingTensor x1 = rng.draw(secret.shape(), t.bits);
  const RingTensor x2 = ring::sub(ring::sub(secret, x0), x1);
  const std::array<RingTensor, kParties> xs{x0, x1, x2};
  std::array<RssShare, kParties> out;
  for (int i = 0; i < kParties; ++i) {
    out[i] = RssShare{i, xs[i], xs[(i + 1) % kParties], t};
  }
  return out;
}

inline RingTensor reveal(const std::array<RssShare, kParties>& shares) {
  for (int i = 0; i < kParties; ++i) {
    const auto& cur = shares[i];
    const auto& nxt = shares[(i + 1) % kParties];
    if (cur.party != i) {
      throw IntegrityError(detail::concat("share slot ", i, " holds party ",
                                          cur.party, "'s share"));
    }
    if (!(cur.hi == nxt.lo)) {
      throw IntegrityError(detail::concat(
          "replication mismatch between party ", i, " and party ",
          (i + 1) % kParties));
    }
  }
  return ring::add(ring::add(shares[0].lo, shares[1].lo), shares[2].lo);
}

inline std::array<BoolShare, kParties> share_bool(const RingTensor& secret,
                                                  Prf& rng) {
  const RingTensor b0 = rng.draw(secret.shape(), secret.width());
  const RingTensor b1 = rng.draw(secret.shape(), secret.width());
  const RingTensor b2 = ring::bit_xor(ring::bit_xor(secret, b0), b1);
  const std::array<RingTensor, kParties> bs{b0, b1, b2};
  std::array<BoolShare, kParties> out;
  for (int i = 0; i < kParties; ++i) {
    out[i] = BoolShare{i, bs[i], bs[(i + 1) % kParties]};
  }
  return out;
}

inline RingTensor reveal_bool(const std::array<BoolShare, kParties>& shares) {
  for (int i = 0; i < kParties; ++i) {
    if (!(shares[i].hi == shares[(i + 1) % kParties].lo)) {
      throw IntegrityError("boolean replication mismatch");
    }
  }
  return ring::bit_xor(ring::bit_xor(shares[0].lo, shares[1].lo),
                       shares[2].lo);
}

// Uncounted reconstruction for debug-mode assertions only.
inline RingTensor debug_open(Party& p, const RssShare& x) {
  auto all = p.debug_exchange(
      std::vector<std::uint64_t>(x.lo.words().begin(), x.lo.words().end()));
  RingTensor out(x.shape(), x.width());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.set(i, all[0][i] + all[1][i] + all[2][i]);
  }
  return out;
}

// Reconstructs x towards all three parties: P_i receives x_{i+2} from P_{i+1}.
// One round, one ring element per party per element.
inline RingTensor open(Party& p, const RssShare& x) {
  PhaseScope ph(p, "open");
  p.send(p.prev_id(), x.hi);
  const RingTensor missing = p.recv(p.next_id(), x.shape(), x.width());
  p.end_round();
  return ring::add(ring::add(x.lo, x.hi), missing);
}

inline RingTensor open_bool(Party& p, const BoolShare& x) {
  PhaseScope ph(p, "open");
  p.send(p.prev_id(), x.hi);
  const RingTensor missing = p.recv(p.next_id(), x.shape(), x.width());
  p.end_round();
  return ring::bit_xor(ring::bit_xor(x.lo, x.hi), missing);
}

// ---------------------------------------------------------------------------
// Local (communication-free) arithmetic.

namespace detail {

template <typename F>
RssShare local(const RssShare& a, F&& f) {
  return RssShare{a.party, f(a.lo), f(a.hi), a.type};
}

template <typename F>
RssShare local2(const RssShare& a, const RssShare& b, F&& f) {
  QMPC_ENFORCE(a.type == b.type, "type mismatch ", a.type.to_string(), " vs ",
               b.type.to_string());
  return RssShare{a.party, f(a.lo, b.lo), f(a.hi, b.hi), a.type};
}

}  // namespace detail

inline RssShare add(const RssShare& a, const RssShare& b) {
  return detail::local2(a, b, ring::add);
}
inline RssShare sub(const RssShare& a, const RssShare& b) {
  return detail::local2(a, b, ring::sub);
}
inline RssShare neg(const RssShare& a) { return detail::local(a, ring::neg); }

inline RssShare mul_public(const RssShare& a, std::uint64_t c) {
  return detail::local(a, [c](const RingTensor& t) {
    return ring::mul_scalar(t, c);
  });
}

// Element-wise product with a public tensor of the same shape.
inline RssShare mul_public(const RssShare& a, const RingTensor& c) {
  return detail::local(a, [&c](const RingTensor& t) { return ring::mul(t, c); });
}

// Public constant enters the x_0 component only: P0 holds it as lo, P2 as hi.
inline RssShare add_const(const RssShare& a, const RingTensor& c) {
  RssShare out = a;
  if (a.party == 0) out.lo = ring::add(a.lo, c);
  if (a.party == 2) out.hi = ring::add(a.hi, c);
  return out;
}

inline RssShare add_const(const RssShare& a, std::uint64_t c) {
  return add_const(a, ring::fill(a.shape(), a.width(), c));
}

inline RssShare shl(const RssShare& a, int s) {
  return detail::local(a, [s](const RingTensor& t) { return ring::shl(t, s); });
}

inline RssShare retype(RssShare a, FxpType t) {
  QMPC_ENFORCE(t.bits == a.width(), "retype cannot change the ring");
  a.type = t;
  return a;
}

inline RssShare reshape(const RssShare& a, Shape s) {
  return detail::local(a, [&s](const RingTensor& t) { return t.reshaped(s); });
}
inline RssShare transpose(const RssShare& a) {
  return detail::local(a, ring::transpose);
}
inline RssShare broadcast_to(const RssShare& a, const Shape& s) {
  return detail::local(a,
                       [&s](const RingTensor& t) { return ring::broadcast_to(t, s); });
}
inline RssShare sum_last(const RssShare& a) {
  return detail::local(a, ring::sum_last);
}
inline RssShare slice_last(const RssShare& a, std::size_t begin,
                           std::size_t end) {
  return detail::local(a, [=](const RingTensor& t) {
    return ring::slice_last(t, begin, end);
  });
}

inline RssShare concat_last(const std::vector<RssShare>& parts) {
  std::vector<RingTensor> lo, hi;
  for (const auto& p : parts) {
    QMPC_ENFORCE(p.type == parts[0].type, "concat type mismatch");
    lo.push_back(p.lo);
    hi.push_back(p.hi);
  }
  return RssShare{parts[0].party, ring::concat_last(lo), ring::concat_last(hi),
                  parts[0].type};
}

inline RssShare concat_flat(const std::vector<RssShare>& parts) {
  std::vector<RingTensor> lo, hi;
  for (const auto& p : parts) {
    QMPC_ENFORCE(p.type == parts[0].type, "concat type mismatch");
    lo.push_back(p.lo);
    hi.push_back(p.hi);
  }
  return RssShare{parts[0].party, ring::concat_flat(lo), ring::concat_flat(hi),
                  parts[0].type};
}

inline std::vector<RssShare> split_flat(const RssShare& a,
                                        const std::vector<Shape>& shapes) {
  auto lo = ring::split_flat(a.lo, shapes);
  auto hi = ring::split_flat(a.hi, shapes);
  std::vector<RssShare> out;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    out.push_back(RssShare{a.party, std::move(lo[i]), std::move(hi[i]), a.type});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multiplication.

// Turns additive shares z_i (one per party) into a fresh replicated sharing:
// P_i masks z_i with a PRF zero-share and sends it to P_{i-1}. One round.
inline RssShare reshare(Party& p, RingTensor z, FxpType type) {
  const RingTensor alpha = ring::sub(p.prf_next().draw(z.shape(), z.width()),
                                     p.prf_prev().draw(z.shape(), z.width()));
  z = ring::add(z, alpha);
  p.send(p.prev_id(), z);
  RingTensor from_next = p.recv(p.next_id(), z.shape(), z.width());
  p.end_round();
  return RssShare{p.id(), std::move(z), std::move(from_next), type};
}

/// Element-wise product. The result is the exact ring product (scale 2^{2f}
/// for fixed-point operands); callers follow with trunc() to restore 2^f.
inline RssShare mul(Party& p, const RssShare& a, const RssShare& b) {
  QMPC_ENFORCE(a.type == b.type, "mul type mismatch");
  QMPC_ENFORCE(a.shape() == b.shape(), "mul shape mismatch ",
               shape_str(a.shape()), " vs ", shape_str(b.shape()));
  PhaseScope ph(p, "mul");
  // x_i y_i + x_{i+1} y_i + x_i y_{i+1}
  RingTensor z(a.shape(), a.width());
  auto& o = z.raw();
  const auto m = z.mask();
  for (std::size_t k = 0; k < o.size(); ++k) {
    o[k] = (a.lo[k] * b.lo[k] + a.hi[k] * b.lo[k] + a.lo[k] * b.hi[k]) & m;
  }
  return reshare(p, std::move(z), a.type);
}

inline RssShare matmul(Party& p, const RssShare& a, const RssShare& b) {
  QMPC_ENFORCE(a.type == b.type, "matmul type mismatch");
  PhaseScope ph(p, "mul");
  // x_i (y_i + y_{i+1}) + x_{i+1} y_i
  RingTensor z = ring::add(ring::matmul(a.lo, ring::add(b.lo, b.hi)),
                           ring::matmul(a.hi, b.lo));
  return reshare(p, std::move(z), a.type);
}

/// Probabilistic truncation by `shift` bits with P2 as dealer.
///
/// Requires |x| < 2^{l-2} (signed) and 0 < shift < l-2. The result equals
/// floor(x / 2^shift) + e with e in {0, 1}; e = 1 with probability
/// (x mod 2^shift) / 2^shift, so exact multiples of 2^shift are exact.
///
/// Round 1: P0 <-> P1 exchange x + r masked halves (r = r0 + r1 from the PRF
/// pairs shared with P2) while P2 sends P1 its halves of r >> shift and
/// msb(r) * 2^{l-shift}. Round 2: P0 <-> P1 exchange PRF-masked output
/// halves, forming the replicated sharing (z0, y1, z2).
inline RssShare trunc(Party& p, const RssShare& x, int shift) {
  const int l = x.width();
  QMPC_ENFORCE(shift > 0 && shift < l - 2, "trunc shift ", shift,
               " invalid for width ", l);
  PhaseScope ph(p, "trunc");
  if (p.debug()) {
    const RingTensor v = debug_open(p, x);
    const std::int64_t bound = std::int64_t{1} << (l - 2);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto s = v.signed_at(i);
      if (s >= bound || s < -bound) {
        throw ConfigError(detail::concat("trunc input ", s,
                                         " outside the supported range"));
      }
    }
  }
  const Shape& shape = x.shape();
  const std::uint64_t bias = std::uint64_t{1} << (l - 2);
  const std::uint64_t mask = ring_mask(l);

  // Public part shared by P0 and P1 once c = x + bias + r is known.
  auto wrap_term = [&](const RingTensor& c, const RingTensor& m_share) {
    RingTensor out(shape, l);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.set(i, msb_of(c[i], l) ? 0 : m_share[i]);
    }
    return out;
  };

  switch (p.id()) {
    case 0: {
      const RingTensor r0 = p.prf_prev().draw(shape, l);
      const RingTensor c0 =
          ring::add(ring::add_scalar(ring::add(x.lo, x.hi), bias), r0);
      p.send(1, c0);
      const RingTensor c1 = p.recv(1, shape, l);
      p.end_round();
      const RingTensor rhi0 = p.prf_prev().draw(shape, l);
      const RingTensor m0 = p.prf_prev().draw(shape, l);
      const RingTensor z0 = p.prf_prev().draw(shape, l);
      const RingTensor c = ring::add(c0, c1);
      RingTensor t0 = ring::sub(ring::lshr(c, shift), rhi0);
      t0 = ring::add_scalar(t0, (0 - (bias >> shift)) & mask);
      t0 = ring::add(t0, wrap_term(c, m0));
      const RingTensor masked = ring::sub(t0, z0);
      p.send(1, masked);
      const RingTensor other = p.recv(1, shape, l);
      p.end_round();
      return RssShare{0, z0, ring::add(masked, other), x.type};
    }
    case 1: {
      const RingTensor r1 = p.prf_next().draw(shape, l);
      const RingTensor c1 = ring::add(x.hi, r1);
      p.send(0, c1);
      const RingTensor c0 = p.recv(0, shape, l);
      const auto dealt = ring::split_flat(
          p.recv(2, Shape{2 * numel(shape)}, l), {shape, shape});
      p.end_round();
      const RingTensor z2 = p.prf_next().draw(shape, l);
      const RingTensor c = ring::add(c0, c1);
      const RingTensor t1 =
          ring::add(ring::neg(dealt[0]), wrap_term(c, dealt[1]));
      const RingTensor masked = ring::sub(t1, z2);
      p.send(0, masked);
      const RingTensor other = p.recv(0, shape, l);
      p.end_round();
      return RssShare{1, ring::add(masked, other), z2, x.type};
    }
    default: {
      const RingTensor r0 = p.prf_next().draw(shape, l);
      const RingTensor r1 = p.prf_prev().draw(shape, l);
      const RingTensor r = ring::add(r0, r1);
      const RingTensor rhi = ring::lshr(r, shift);
      const RingTensor m = ring::map(r, [l, shift](std::uint64_t v) {
        return msb_of(v, l) << (l - shift);
      });
      const RingTensor rhi0 = p.prf_next().draw(shape, l);
      const RingTensor m0 = p.prf_next().draw(shape, l);
      p.send(1, ring::concat_flat({ring::sub(rhi, rhi0), ring::sub(m, m0)}));
      p.end_round();
      const RingTensor z0 = p.prf_next().draw(shape, l);
      const RingTensor z2 = p.prf_prev().draw(shape, l);
      p.end_round();
      return RssShare{2, z2, z0, x.type};
    }
  }
}

// Fixed-point product: mul followed by truncation by the fraction bits.
inline RssShare mul_trunc(Party& p, const RssShare& a, const RssShare& b) {
  return trunc(p, mul(p, a, b), a.type.frac);
}

inline RssShare matmul_trunc(Party& p, const RssShare& a, const RssShare& b) {
  return trunc(p, matmul(p, a, b), a.type.frac);
}

// Multiplication by a public real constant at the operand's precision.
inline RssShare scale(Party& p, const RssShare& a, double factor) {
  const std::int64_t c = fxp_const(factor, a.type.frac);
  return trunc(p, mul_public(a, from_signed(c, a.width())), a.type.frac);
}

// Batched forms: one resharing / one truncation for all operands.
namespace detail {

inline std::vector<Shape> shapes_of(const std::vector<RssShare>& xs) {
  std::vector<Shape> out;
  for (const auto& x : xs) out.push_back(x.shape());
  return out;
}

}  // namespace detail

inline std::vector<RssShare> mul_many(Party& p, const std::vector<RssShare>& a,
                                      const std::vector<RssShare>& b) {
  QMPC_ENFORCE(a.size() == b.size() && !a.empty(), "mul_many arity");
  for (std::size_t k = 0; k < a.size(); ++k) {
    QMPC_ENFORCE(a[k].shape() == b[k].shape(), "mul_many shape mismatch at ",
                 k);
  }
  return split_flat(mul(p, concat_flat(a), concat_flat(b)),
                    detail::shapes_of(a));
}

inline std::vector<RssShare> trunc_many(Party& p,
                                        const std::vector<RssShare>& xs,
                                        int shift) {
  QMPC_ENFORCE(!xs.empty(), "trunc_many arity");
  return split_flat(trunc(p, concat_flat(xs), shift), detail::shapes_of(xs));
}

inline std::vector<RssShare> mul_trunc_many(Party& p,
                                            const std::vector<RssShare>& a,
                                            const std::vector<RssShare>& b) {
  return trunc_many(p, mul_many(p, a, b), a.at(0).type.frac);
}

// ---------------------------------------------------------------------------
// Boolean sharing.

inline BoolShare bxor(const BoolShare& a, const BoolShare& b) {
  return BoolShare{a.party, ring::bit_xor(a.lo, b.lo), ring::bit_xor(a.hi, b.hi)};
}

// Complement: flips the bits of component 0 (P0's lo, P2's hi).
inline BoolShare bnot(const BoolShare& a) {
  BoolShare out = a;
  const std::uint64_t all = a.lo.mask();
  if (a.party == 0) out.lo = ring::map(a.lo, [all](auto v) { return v ^ all; });
  if (a.party == 2) out.hi = ring::map(a.hi, [all](auto v) { return v ^ all; });
  return out;
}

inline BoolShare bshl(const BoolShare& a, int s) {
  return BoolShare{a.party, ring::shl(a.lo, s), ring::shl(a.hi, s)};
}
inline BoolShare bshr(const BoolShare& a, int s) {
  return BoolShare{a.party, ring::lshr(a.lo, s), ring::lshr(a.hi, s)};
}

// Single bit `index` of every element, as a width-1 sharing.
inline BoolShare bit_at(const BoolShare& a, int index) {
  return BoolShare{a.party, ring::reduce(ring::lshr(a.lo, index), 1),
                   ring::reduce(ring::lshr(a.hi, index), 1)};
}

/// Batched AND of pairs (a[k], b[k]); all operands share one width.
/// One round; each party sends `width` bits per element.
inline std::vector<BoolShare> band_many(Party& p,
                                        const std::vector<BoolShare>& a,
                                        const std::vector<BoolShare>& b) {
  QMPC_ENFORCE(a.size() == b.size() && !a.empty(), "band_many arity");
  PhaseScope ph(p, "and");
  std::vector<RingTensor> zs;
  std::vector<Shape> shapes;
  for (std::size_t k = 0; k < a.size(); ++k) {
    QMPC_ENFORCE(a[k].shape() == b[k].shape() && a[k].width() == b[k].width() &&
                     a[k].width() == a[0].width(),
                 "band operands disagree");
    zs.push_back(ring::bit_xor(
        ring::bit_xor(ring::bit_and(a[k].lo, b[k].lo),
                      ring::bit_and(a[k].hi, b[k].lo)),
        ring::bit_and(a[k].lo, b[k].hi)));
    shapes.push_back(a[k].shape());
  }
  RingTensor z = ring::concat_flat(zs);
  const RingTensor alpha =
      ring::bit_xor(p.prf_next().draw(z.shape(), z.width()),
                    p.prf_prev().draw(z.shape(), z.width()));
  z = ring::bit_xor(z, alpha);
  p.send(p.prev_id(), z);
  const RingTensor from_next = p.recv(p.next_id(), z.shape(), z.width());
  p.end_round();
  auto lo = ring::split_flat(z, shapes);
  auto hi = ring::split_flat(from_next, shapes);
  std::vector<BoolShare> out;
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    out.push_back(BoolShare{p.id(), std::move(lo[k]), std::move(hi[k])});
  }
  return out;
}

inline BoolShare band(Party& p, const BoolShare& a, const BoolShare& b) {
  return band_many(p, {a}, {b})[0];
}

// a | b = ~(~a & ~b)
inline std::vector<BoolShare> bor_many(Party& p,
                                       const std::vector<BoolShare>& a,
                                       const std::vector<BoolShare>& b) {
  std::vector<BoolShare> na, nb;
  for (const auto& s : a) na.push_back(bnot(s));
  for (const auto& s : b) nb.push_back(bnot(s));
  auto out = band_many(p, na, nb);
  for (auto& s : out) s = bnot(s);
  return out;
}

/// Arithmetic-to-boolean conversion. Splits x into the addends x0 + x1
/// (known to P0) and x2 (known to P1 and P2), shares both as boolean values
/// and adds them with a Kogge-Stone parallel-prefix adder:
/// 1 + 1 + log2(l) rounds.
inline BoolShare a2b(Party& p, const RssShare& x) {
  PhaseScope ph(p, "a2b");
  const int l = x.width();
  const Shape& shape = x.shape();
  const RingTensor zero(shape, l);

  BoolShare m{p.id(), zero, zero};
  switch (p.id()) {
    case 0: {
      const RingTensor rho = p.prf_next().draw(shape, l);
      const RingTensor m0 = ring::bit_xor(ring::add(x.lo, x.hi), rho);
      p.send(2, m0);
      m.lo = m0;
      m.hi = rho;
      break;
    }
    case 1:
      m.lo = p.prf_prev().draw(shape, l);
      break;
    default:
      m.hi = p.recv(0, shape, l);
      break;
  }
  p.end_round();

  BoolShare n{p.id(), zero, zero};
  if (p.id() == 1) n.hi = x.hi;
  if (p.id() == 2) n.lo = x.lo;

  BoolShare g = band(p, m, n);
  BoolShare prop = bxor(m, n);
  const BoolShare prop0 = prop;
  for (int s = 1; s < l; s <<= 1) {
    const bool last = (s << 1) >= l;
    if (last) {
      g = bxor(g, band(p, prop, bshl(g, s)));
    } else {
      auto r = band_many(p, {prop, prop}, {bshl(g, s), bshl(prop, s)});
      g = bxor(g, r[0]);
      prop = r[1];
    }
  }
  return bxor(prop0, bshl(g, 1));
}

// Boolean sharing of the sign bit.
inline BoolShare msb(Party& p, const RssShare& x) {
  return bit_at(a2b(p, x), x.width() - 1);
}

// a < b as msb(a - b); requires |a - b| < 2^{l-1}.
inline BoolShare less_than(Party& p, const RssShare& a, const RssShare& b) {
  return msb(p, sub(a, b));
}

inline BoolShare bconcat_flat(const std::vector<BoolShare>& parts) {
  std::vector<RingTensor> lo, hi;
  for (const auto& p : parts) {
    lo.push_back(p.lo);
    hi.push_back(p.hi);
  }
  return BoolShare{parts.at(0).party, ring::concat_flat(lo),
                   ring::concat_flat(hi)};
}

inline std::vector<BoolShare> bsplit_flat(const BoolShare& a,
                                          const std::vector<Shape>& shapes) {
  auto lo = ring::split_flat(a.lo, shapes);
  auto hi = ring::split_flat(a.hi, shapes);
  std::vector<BoolShare> out;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    out.push_back(BoolShare{a.party, std::move(lo[i]), std::move(hi[i])});
  }
  return out;
}

/// Converts a width-1 boolean sharing into an arithmetic sharing of the same
/// bit (integer 0/1) in the ring of `t`: c = c0 ^ c1 ^ c2 evaluated as
/// u + v - 2uv twice. Two rounds.
inline RssShare bit_inject(Party& p, const BoolShare& c, FxpType t) {
  QMPC_ENFORCE(c.width() == 1, "bit_inject expects single-bit elements");
  PhaseScope ph(p, "b2a");
  const int l = t.bits;
  const RingTensor lo = ring::reduce(c.lo, l);
  const RingTensor hi = ring::reduce(c.hi, l);
  const RingTensor zero(c.shape(), l);
  auto component = [&](int j) {
    RssShare a{p.id(), zero, zero, t};
    if (p.id() == j) a.lo = lo;
    if (p.next_id() == j) a.hi = hi;
    return a;
  };
  const RssShare a0 = component(0), a1 = component(1), a2 = component(2);
  const RssShare u = sub(add(a0, a1), mul_public(mul(p, a0, a1), 2));
  return sub(add(u, a2), mul_public(mul(p, u, a2), 2));
}

// c ? a : b, as b + c * (a - b).
inline RssShare select(Party& p, const BoolShare& c, const RssShare& a,
                       const RssShare& b) {
  PhaseScope ph(p, "select");
  const RssShare ci = bit_inject(p, c, a.type);
  return add(b, mul(p, ci, sub(a, b)));
}

}  // namespace qmpc
