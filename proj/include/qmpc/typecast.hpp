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

#include "qmpc/rss.hpp"

namespace qmpc {

/// kFloor is the local share shift; its result lies 0..2 ulp below
/// floor(x / 2^t). kTrunc runs the two-round truncation in the source ring and
/// then reduces the shares, giving floor(x / 2^t) + {0, 1}. The latter never
/// maps a nonnegative value below zero.
enum class Rounding { kFloor, kTrunc };

/// Local conversion from FXP_l^f to a smaller ring FXP_l'^f' (l > l', f > f').
///
/// Each share is logically shifted right by t = f - f' and reduced mod 2^l'.
/// Requires l - t >= l' so the wrap of the share sum vanishes in the smaller
/// ring. The decoded result is 0, 1 or 2 ulp below floor(x / 2^t).
inline RssShare downcast(Party& p, const RssShare& x, FxpType target,
                         Rounding mode = Rounding::kFloor) {
  target.validate();
  const FxpType from = x.type;
  const int t = from.frac - target.frac;
  QMPC_ENFORCE(from.bits > target.bits, "downcast needs a smaller ring: ",
               from.to_string(), " -> ", target.to_string());
  QMPC_ENFORCE(t > 0, "downcast needs fewer fraction bits: ", from.to_string(),
               " -> ", target.to_string());
  QMPC_ENFORCE(from.bits - t >= target.bits, "downcast ", from.to_string(),
               " -> ", target.to_string(), " leaves a wrap term");
  PhaseScope ph(p, "downcast");
  if (p.debug()) {
    const RingTensor v = debug_open(p, x);
    const std::int64_t bound = std::int64_t{1} << (target.bits - 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto s = v.signed_at(i) >> t;
      if (s >= bound || s < -bound) {
        throw ConfigError(detail::concat("downcast input ", v.signed_at(i),
                                         " not representable in ",
                                         target.to_string()));
      }
    }
  }
  if (mode == Rounding::kTrunc) {
    const RssShare y = trunc(p, x, t);
    return RssShare{x.party, ring::reduce(y.lo, target.bits),
                    ring::reduce(y.hi, target.bits), target};
  }
  auto cast = [&](const RingTensor& s) {
    return ring::reduce(ring::lshr(s, t), target.bits);
  };
  return RssShare{x.party, cast(x.lo), cast(x.hi), target};
}

/// Wire bits per element of upcast from an l-bit to an l'-bit ring.
constexpr std::uint64_t upcast_bits(int l, int lp) {
  return 4 * static_cast<std::uint64_t>(lp) + static_cast<std::uint64_t>(l);
}

/// Interactive conversion from FXP_l^f to a larger ring FXP_l'^f'
/// (l < l', f <= f'). Exact for x in [-2^{l-2}, 2^{l-2}) (raw ring units).
///
/// v = x + 2^{l-2} is non-negative, so opening y = v + r mod 2^l wraps exactly
/// when msb(r) = 1 and msb(y) = 0, and v = y - r + msb(r)(1 - msb(y)) 2^l over
/// the integers. P2 deals r and msb(r) as 2-of-2 shares over the larger ring;
/// P0's halves come from the PRF it shares with P2.
///
/// Round 1: P2 -> P1 sends s1 (l' bits) and q1 (l' - l bits).
/// Round 2: P0 <-> P1 open y (l bits each way).
/// Round 3: P0 <-> P1 exchange PRF-masked halves of the result (l' bits each).
/// Total 4 l' + l bits per element.
inline RssShare upcast(Party& p, const RssShare& x, FxpType target) {
  target.validate();
  const FxpType from = x.type;
  const int l = from.bits;
  const int lp = target.bits;
  const int t = target.frac - from.frac;
  QMPC_ENFORCE(lp > l, "upcast needs a larger ring: ", from.to_string(),
               " -> ", target.to_string());
  QMPC_ENFORCE(t >= 0, "upcast cannot drop fraction bits: ", from.to_string(),
               " -> ", target.to_string());
  QMPC_ENFORCE(lp >= l - 1 + t, "upcast ", from.to_string(), " -> ",
               target.to_string(), " overflows the target ring");
  PhaseScope ph(p, "upcast");

  RingTensor expect;
  if (p.debug()) {
    expect = debug_open(p, x);
    const std::int64_t bound = std::int64_t{1} << (l - 2);
    for (std::size_t i = 0; i < expect.size(); ++i) {
      const auto s = expect.signed_at(i);
      if (s >= bound || s < -bound) {
        throw ConfigError(detail::concat("upcast input ", s,
                                         " outside the supported range of ",
                                         from.to_string()));
      }
    }
  }

  const Shape& shape = x.shape();
  const int qbits = lp - l;
  const std::uint64_t bias = std::uint64_t{1} << (l - 2);

  // Larger-ring additive share of the value, held by P0 (first) or P1.
  auto finish = [&](const RingTensor& y, const RingTensor& s,
                    const RingTensor& q, bool first) {
    RingTensor out(shape, lp);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const std::uint64_t wrap = msb_of(y[i], l) ? 0 : (q[i] << l);
      std::uint64_t v = (first ? y[i] : 0) - s[i] + wrap;
      if (first) v -= bias;
      out.set(i, v << t);
    }
    return out;
  };

  RssShare result;
  switch (p.id()) {
    case 0: {
      const RingTensor s0 = p.prf_prev().draw(shape, lp);
      const RingTensor q0 = p.prf_prev().draw(shape, qbits);
      p.end_round();
      const RingTensor a0 = ring::add(
          ring::add_scalar(ring::add(x.lo, x.hi), bias), ring::reduce(s0, l));
      p.send(1, a0);
      const RingTensor y = ring::add(a0, p.recv(1, shape, l));
      p.end_round();
      const RingTensor z0 = p.prf_prev().draw(shape, lp);
      const RingTensor masked = ring::sub(finish(y, s0, q0, true), z0);
      p.send(1, masked);
      const RingTensor other = p.recv(1, shape, lp);
      p.end_round();
      result = RssShare{0, z0, ring::add(masked, other), target};
      break;
    }
    case 1: {
      const RingTensor s1 = p.recv(2, shape, lp);
      const RingTensor q1 = p.recv(2, shape, qbits);
      p.end_round();
      const RingTensor a1 = ring::add(x.hi, ring::reduce(s1, l));
      p.send(0, a1);
      const RingTensor y = ring::add(a1, p.recv(0, shape, l));
      p.end_round();
      const RingTensor z2 = p.prf_next().draw(shape, lp);
      const RingTensor masked = ring::sub(finish(y, s1, q1, false), z2);
      p.send(0, masked);
      const RingTensor other = p.recv(0, shape, lp);
      p.end_round();
      result = RssShare{1, ring::add(masked, other), z2, target};
      break;
    }
    default: {
      const RingTensor r = p.prf_own().draw(shape, l);
      const RingTensor s0 = p.prf_next().draw(shape, lp);
      const RingTensor q0 = p.prf_next().draw(shape, qbits);
      const RingTensor rl = ring::reduce(r, lp);
      const RingTensor rmsb = ring::reduce(ring::lshr(r, l - 1), qbits);
      p.send(1, ring::sub(rl, s0));
      p.send(1, ring::sub(rmsb, q0));
      p.end_round();
      p.end_round();
      const RingTensor z0 = p.prf_next().draw(shape, lp);
      const RingTensor z2 = p.prf_prev().draw(shape, lp);
      p.end_round();
      result = RssShare{2, z2, z0, target};
      break;
    }
  }

  if (p.debug()) {
    const RingTensor got = debug_open(p, result);
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got.signed_at(i) != (expect.signed_at(i) << t)) {
        throw IntegrityError(detail::concat("upcast mismatch at ", i, ": ",
                                            expect.signed_at(i), " -> ",
                                            got.signed_at(i)));
      }
    }
  }
  return result;
}

/// Converts between any two fixed-point types: upcast / downcast across
/// rings, and truncation or a left shift within one ring.
inline RssShare cast(Party& p, const RssShare& x, FxpType target,
                     Rounding mode = Rounding::kFloor) {
  if (x.type == target) return x;
  if (target.bits > x.type.bits) {
    if (target.frac >= x.type.frac) return upcast(p, x, target);
    // Shrink the fraction first, then widen.
    const FxpType mid{x.type.bits, target.frac};
    return upcast(p, retype(trunc(p, x, x.type.frac - target.frac), mid),
                  target);
  }
  if (target.bits < x.type.bits) {
    if (target.frac < x.type.frac &&
        x.type.bits - (x.type.frac - target.frac) >= target.bits) {
      return downcast(p, x, target, mode);
    }
    QMPC_ENFORCE(false, "unsupported cast ", x.type.to_string(), " -> ",
                 target.to_string());
  }
  if (target.frac > x.type.frac) {
    return retype(shl(x, target.frac - x.type.frac), target);
  }
  return retype(trunc(p, x, x.type.frac - target.frac), target);
}

}  // namespace qmpc
