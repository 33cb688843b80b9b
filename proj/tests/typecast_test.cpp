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

#include "test_util.hpp"

namespace qmpc {
namespace {

using testing::rng;
using testing::run_reveal;
using Ins = std::vector<RssShare>;

RingTensor range_words(std::int64_t lo, std::int64_t hi, int width,
                       std::size_t repeat = 1) {
  RingTensor t(Shape{static_cast<std::size_t>(hi - lo) * repeat}, width);
  std::size_t k = 0;
  for (std::int64_t v = lo; v < hi; ++v)
    for (std::size_t r = 0; r < repeat; ++r) t.set(k++, from_signed(v, width));
  return t;
}

TEST(Downcast, HighOneToLow) {
  Session s;
  const auto x = ring::fill(Shape{2000}, 64, 262144);  // 1.0 at fxp<64,18>
  const auto r = run_reveal(s, {x}, FxpType::high(), [](Party& p, Ins& in) {
    return downcast(p, in[0], FxpType::low());
  });
  for (std::size_t i = 0; i < r.size(); ++i) {
    ASSERT_GE(r.signed_at(i), 254);
    ASSERT_LE(r.signed_at(i), 256);
  }
  EXPECT_EQ(s.stats().total_bytes(), 0u);
  EXPECT_EQ(s.stats().rounds, 0u);
}

TEST(Downcast, ExhaustiveSmallRing) {
  Session s;
  const FxpType from{16, 6}, to{8, 2};
  // Every 16-bit value whose image fits the 8-bit ring, leaving room for the
  // two-ulp downward carry at the bottom of the range.
  const auto x = range_words(-(1 << 11) + 2 * 16, 1 << 11, 16);
  const auto r = run_reveal(
      s, {x}, from, [&](Party& p, Ins& in) { return downcast(p, in[0], to); });
  int worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::int64_t floor_v = x.signed_at(i) >> 4;
    const std::int64_t err = floor_v - r.signed_at(i);
    ASSERT_GE(err, 0) << x.signed_at(i);
    ASSERT_LE(err, 2) << x.signed_at(i);
    worst = std::max<int>(worst, static_cast<int>(err));
  }
  EXPECT_GE(worst, 1);
  EXPECT_EQ(s.stats().total_bytes(), 0u);
}

TEST(Downcast, ModularErrorOverWholeRange) {
  Session s;
  const FxpType from{16, 6}, to{8, 2};
  const auto x = range_words(-(1 << 15), 1 << 15, 16);
  const auto r = run_reveal(
      s, {x}, from, [&](Party& p, Ins& in) { return downcast(p, in[0], to); });
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::uint64_t d = ((x[i] >> 4) - r[i]) & 0xff;
    ASSERT_LE(d, 2u) << x.signed_at(i);
  }
}

TEST(Downcast, TruncRoundingStaysWithinOneUlpAbove) {
  Session s;
  const FxpType from{16, 6}, to{8, 2};
  // The top target value is left out since rounding it up wraps the ring.
  const auto x = range_words(-(1 << 11), (1 << 11) - 16, 16, 4);
  const auto r = run_reveal(s, {x}, from, [&](Party& p, Ins& in) {
    return downcast(p, in[0], to, Rounding::kTrunc);
  });
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::int64_t floor_v = x.signed_at(i) >> 4;
    const std::int64_t d = r.signed_at(i) - floor_v;
    ASSERT_TRUE(d == 0 || d == 1) << x.signed_at(i) << " -> " << r.signed_at(i);
  }
  EXPECT_EQ(s.stats().rounds, 2u);
}

TEST(Downcast, RejectsBadParameters) {
  Session s;
  const auto x = RingTensor(Shape{1}, 64);
  auto attempt = [&](FxpType from, FxpType to) {
    return run_reveal(s, {RingTensor(Shape{1}, from.bits)}, from,
                      [&](Party& p, Ins& in) { return downcast(p, in[0], to); });
  };
  EXPECT_THROW(attempt(FxpType::low(), FxpType::high()), ConfigError);
  EXPECT_THROW(attempt({64, 8}, {32, 8}), ConfigError);
  EXPECT_THROW(attempt({64, 50}, {32, 8}), ConfigError);
  EXPECT_NO_THROW(attempt({64, 40}, {32, 8}));
  (void)x;
}

TEST(Upcast, LowOneToHighExact) {
  Session s;
  const auto x = ring::fill(Shape{1000}, 32, 256);
  const auto r = run_reveal(s, {x}, FxpType::low(), [](Party& p, Ins& in) {
    return upcast(p, in[0], FxpType::high());
  });
  for (std::size_t i = 0; i < r.size(); ++i) ASSERT_EQ(r[i], 262144u);
  EXPECT_EQ(s.stats().rounds, 3u);
}

TEST(Upcast, ExhaustiveSmallRingManyMasks) {
  for (FxpType from : {FxpType{8, 0}, FxpType{8, 2}}) {
    const FxpType to{16, from.frac + 4};
    Session s;
    const auto x = range_words(-64, 64, 8, 100);
    const auto r = run_reveal(
        s, {x}, from, [&](Party& p, Ins& in) { return upcast(p, in[0], to); });
    const auto din = decode(x, from);
    const auto dout = decode(r, to);
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_EQ(din[i], dout[i]);
    EXPECT_EQ(s.stats().rounds, 3u);
  }
}

TEST(Upcast, RandomLowToHigh) {
  Session s;
  std::uniform_int_distribution<std::int64_t> d(-(1ll << 30), (1ll << 30) - 1);
  RingTensor x(Shape{10000}, 32);
  for (std::size_t i = 0; i < x.size(); ++i) x.set(i, from_signed(d(rng()), 32));
  const auto r = run_reveal(s, {x}, FxpType::low(), [](Party& p, Ins& in) {
    return upcast(p, in[0], FxpType::high());
  });
  for (std::size_t i = 0; i < x.size(); ++i)
    ASSERT_EQ(r.signed_at(i), x.signed_at(i) * 1024);
}

TEST(Upcast, BitsPerElementMatchSchedule) {
  for (auto [from, to] : {std::pair{FxpType::low(), FxpType::high()},
                          std::pair{FxpType{8, 2}, FxpType{16, 6}}}) {
    Session s;
    const std::size_t n = 64;
    run_reveal(s, {RingTensor(Shape{n}, from.bits)}, from,
               [&](Party& p, Ins& in) { return upcast(p, in[0], to); });
    const auto bits = s.stats().total_bytes() * 8 / n;
    EXPECT_EQ(bits, static_cast<std::uint64_t>(4 * to.bits + from.bits));
    EXPECT_EQ(s.stats().pairs[2][0].bytes, 0u);
  }
}

TEST(Upcast, BiasNeutral) {
  Session s;
  const FxpType from = FxpType::low(), to = FxpType::high();
  const auto x = encode(testing::uniform(2000, -1000, 1000), from);
  const std::uint64_t c = 12345;
  const auto plain = run_reveal(
      s, {x}, from, [&](Party& p, Ins& in) { return upcast(p, in[0], to); });
  const auto shifted = run_reveal(s, {x}, from, [&](Party& p, Ins& in) {
    auto y = upcast(p, add_const(in[0], c), to);
    return add_const(y, from_signed(-static_cast<std::int64_t>(c) << 10, 64));
  });
  EXPECT_EQ(plain, shifted);
}

TEST(Upcast, RoundTripThroughDowncast) {
  Session s;
  const FxpType lo = FxpType::low(), hi = FxpType::high();
  const auto x = encode(testing::uniform(5000, -5000, 5000), lo);
  const auto r = run_reveal(s, {x}, lo, [&](Party& p, Ins& in) {
    return downcast(p, upcast(p, in[0], hi), lo);
  });
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto err = x.signed_at(i) - r.signed_at(i);
    ASSERT_TRUE(err >= 0 && err <= 2);
  }
}

TEST(Upcast, RejectsBadParameters) {
  Session s;
  auto attempt = [&](FxpType from, FxpType to) {
    return run_reveal(s, {RingTensor(Shape{1}, from.bits)}, from,
                      [&](Party& p, Ins& in) { return upcast(p, in[0], to); });
  };
  EXPECT_THROW(attempt(FxpType::high(), FxpType::low()), ConfigError);
  EXPECT_THROW(attempt({32, 18}, {64, 8}), ConfigError);
  EXPECT_THROW(attempt({32, 0}, {64, 40}), ConfigError);
}

TEST(Upcast, DebugModeFlagsRangeViolation) {
  Session s(SessionOptions{7, true});
  const auto x = RingTensor(Shape{1}, 32, {from_signed(1ll << 30, 32)});
  EXPECT_THROW(run_reveal(s, {x}, FxpType::low(),
                          [](Party& p, Ins& in) {
                            return upcast(p, in[0], FxpType::high());
                          }),
               ConfigError);
  const auto ok = RingTensor(Shape{1}, 32, {from_signed(-(1ll << 30), 32)});
  const auto r = run_reveal(s, {ok}, FxpType::low(), [](Party& p, Ins& in) {
    return upcast(p, in[0], FxpType::high());
  });
  EXPECT_EQ(r.signed_at(0), -(1ll << 40));
}

TEST(Cast, Dispatch) {
  Session s;
  const auto x = encode(std::vector<double>{1.5, -2.25}, FxpType::low());
  const auto up = run_reveal(s, {x}, FxpType::low(), [](Party& p, Ins& in) {
    return cast(p, in[0], FxpType::high());
  });
  EXPECT_EQ(decode(up, FxpType::high())[1], -2.25);
  const auto same = run_reveal(s, {x}, FxpType::low(), [](Party& p, Ins& in) {
    return cast(p, in[0], FxpType{32, 12});
  });
  EXPECT_EQ(decode(same, FxpType{32, 12})[0], 1.5);
  const auto down = run_reveal(s, {x}, FxpType::low(), [](Party& p, Ins& in) {
    return cast(p, in[0], FxpType{32, 4});
  });
  EXPECT_NEAR(decode(down, FxpType{32, 4})[0], 1.5, 1.0 / 16);
}

}  // namespace
}  // namespace qmpc
