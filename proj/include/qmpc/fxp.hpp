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
#include <cstdio>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qmpc/common.hpp"

namespace qmpc {

// Ring helpers. Words are stored in 64-bit containers; `width` is the logical
// ring size l, and every stored word satisfies word < 2^l.

constexpr std::uint64_t ring_mask(int width) {
  return width >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
}

constexpr std::int64_t to_signed(std::uint64_t word, int width) {
  if (width >= 64) return static_cast<std::int64_t>(word);
  const std::uint64_t sign = std::uint64_t{1} << (width - 1);
  word &= ring_mask(width);
  return (word & sign) ? static_cast<std::int64_t>(word | ~ring_mask(width))
                       : static_cast<std::int64_t>(word);
}

constexpr std::uint64_t from_signed(std::int64_t v, int width) {
  return static_cast<std::uint64_t>(v) & ring_mask(width);
}

constexpr std::uint64_t msb_of(std::uint64_t word, int width) {
  return (word >> (width - 1)) & 1U;
}

/// Fixed-point encoding descriptor: an l-bit two's-complement ring with f
/// fraction bits. Real v is represented by round(v * 2^f) mod 2^l.
struct FxpType {
  int bits = 32;
  int frac = 8;

  static constexpr FxpType low() { return {32, 8}; }
  static constexpr FxpType high() { return {64, 18}; }

  constexpr bool valid() const {
    const bool width_ok = bits == 8 || bits == 16 || bits == 32 || bits == 64;
    return width_ok && frac >= 0 && frac < bits - 1;
  }

  void validate() const {
    if (!valid()) {
      throw ConfigError(detail::concat("unsupported fixed-point type fxp<",
                                       bits, ",", frac, ">"));
    }
  }

  constexpr double ulp() const { return std::ldexp(1.0, -frac); }

  std::string to_string() const {
    return detail::concat("fxp<", bits, ",", frac, ">");
  }

  // Accepts "fxp<32,8>" and the short aliases "low" / "high".
  static FxpType parse(std::string_view text) {
    if (text == "low") return low();
    if (text == "high") return high();
    int b = 0;
    int f = 0;
    const std::string s(text);
    if (std::sscanf(s.c_str(), "fxp<%d,%d>", &b, &f) != 2) {
      throw ConfigError("cannot parse fixed-point type '" + s + "'");
    }
    FxpType t{b, f};
    t.validate();
    return t;
  }

  friend constexpr bool operator==(const FxpType&, const FxpType&) = default;
};

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// Dense row-major tensor of ring elements mod 2^width.
class RingTensor {
 public:
  RingTensor() = default;

  RingTensor(Shape shape, int width)
      : shape_(std::move(shape)), width_(width), data_(numel(shape_), 0) {
    check_width();
  }

  RingTensor(Shape shape, int width, std::vector<std::uint64_t> data)
      : shape_(std::move(shape)), width_(width), data_(std::move(data)) {
    check_width();
    QMPC_ENFORCE(data_.size() == numel(shape_), "data length ", data_.size(),
                 " does not match shape ", shape_str(shape_));
    const auto m = mask();
    for (auto& w : data_) w &= m;
  }

  static RingTensor scalar(std::uint64_t word, int width) {
    return RingTensor({1}, width, {word});
  }

  const Shape& shape() const { return shape_; }
  int width() const { return width_; }
  std::uint64_t mask() const { return ring_mask(width_); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::uint64_t operator[](std::size_t i) const { return data_[i]; }
  std::int64_t signed_at(std::size_t i) const {
    return to_signed(data_[i], width_);
  }
  void set(std::size_t i, std::uint64_t word) { data_[i] = word & mask(); }

  std::span<const std::uint64_t> words() const { return data_; }

  // Raw mutable access; callers must leave every word reduced mod 2^width.
  std::vector<std::uint64_t>& raw() { return data_; }

  RingTensor reshaped(Shape shape) const {
    QMPC_ENFORCE(numel(shape) == size(), "cannot reshape ", shape_str(shape_),
                 " to ", shape_str(shape));
    RingTensor out = *this;
    out.shape_ = std::move(shape);
    return out;
  }

  friend bool operator==(const RingTensor&, const RingTensor&) = default;

 private:
  void check_width() const {
    QMPC_ENFORCE(width_ >= 1 && width_ <= 64, "ring width ", width_);
  }

  Shape shape_;
  int width_ = 64;
  std::vector<std::uint64_t> data_;
};

// ---------------------------------------------------------------------------
// Element-wise ring arithmetic. Binary ops require equal shapes and widths;
// broadcasting is explicit through broadcast_to().

namespace ring {

inline void check_same(const RingTensor& a, const RingTensor& b) {
  QMPC_ENFORCE(a.width() == b.width(), "width mismatch ", a.width(), " vs ",
               b.width());
  QMPC_ENFORCE(a.shape() == b.shape(), "shape mismatch ",
               shape_str(a.shape()), " vs ", shape_str(b.shape()));
}

template <typename F>
RingTensor zip(const RingTensor& a, const RingTensor& b, F&& f) {
  check_same(a, b);
  RingTensor out(a.shape(), a.width());
  auto& o = out.raw();
  const auto m = a.mask();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(a[i], b[i]) & m;
  return out;
}

template <typename F>
RingTensor map(const RingTensor& a, F&& f) {
  RingTensor out(a.shape(), a.width());
  auto& o = out.raw();
  const auto m = a.mask();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(a[i]) & m;
  return out;
}

inline RingTensor add(const RingTensor& a, const RingTensor& b) {
  return zip(a, b, [](auto x, auto y) { return x + y; });
}
inline RingTensor sub(const RingTensor& a, const RingTensor& b) {
  return zip(a, b, [](auto x, auto y) { return x - y; });
}
inline RingTensor mul(const RingTensor& a, const RingTensor& b) {
  return zip(a, b, [](auto x, auto y) { return x * y; });
}
inline RingTensor bit_xor(const RingTensor& a, const RingTensor& b) {
  return zip(a, b, [](auto x, auto y) { return x ^ y; });
}
inline RingTensor bit_and(const RingTensor& a, const RingTensor& b) {
  return zip(a, b, [](auto x, auto y) { return x & y; });
}
inline RingTensor neg(const RingTensor& a) {
  return map(a, [](auto x) { return std::uint64_t{0} - x; });
}
inline RingTensor mul_scalar(const RingTensor& a, std::uint64_t c) {
  return map(a, [c](auto x) { return x * c; });
}
inline RingTensor add_scalar(const RingTensor& a, std::uint64_t c) {
  return map(a, [c](auto x) { return x + c; });
}
inline RingTensor shl(const RingTensor& a, int s) {
  return map(a, [s](auto x) { return s >= 64 ? 0 : x << s; });
}
// Logical right shift of the unsigned ring word.
inline RingTensor lshr(const RingTensor& a, int s) {
  return map(a, [s](auto x) { return s >= 64 ? 0 : x >> s; });
}
// Arithmetic right shift of the two's-complement interpretation.
inline RingTensor ashr(const RingTensor& a, int s) {
  const int w = a.width();
  return map(a, [s, w](auto x) {
    return static_cast<std::uint64_t>(to_signed(x, w) >> std::min(s, 63));
  });
}

// Re-interpret words in a ring of a different width (reduction mod 2^width
// when shrinking, zero extension when growing).
inline RingTensor reduce(const RingTensor& a, int width) {
  std::vector<std::uint64_t> data(a.words().begin(), a.words().end());
  return RingTensor(a.shape(), width, std::move(data));
}

inline RingTensor sign_extend(const RingTensor& a, int width) {
  RingTensor out(a.shape(), width);
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.set(i, static_cast<std::uint64_t>(a.signed_at(i)));
  }
  return out;
}

inline RingTensor fill(const Shape& shape, int width, std::uint64_t word) {
  RingTensor out(shape, width);
  for (auto& w : out.raw()) w = word & out.mask();
  return out;
}

inline std::size_t rows_of(const Shape& s) {
  return s.size() <= 1 ? 1 : numel(s) / s.back();
}
inline std::size_t cols_of(const Shape& s) { return s.empty() ? 1 : s.back(); }

// [m,k] x [k,n] -> [m,n], accumulated mod 2^width.
inline RingTensor matmul(const RingTensor& a, const RingTensor& b) {
  QMPC_ENFORCE(a.width() == b.width(), "width mismatch");
  QMPC_ENFORCE(a.shape().size() == 2 && b.shape().size() == 2,
               "matmul expects 2-D operands");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  QMPC_ENFORCE(b.shape()[0] == k, "inner dims ", shape_str(a.shape()), " x ",
               shape_str(b.shape()));
  RingTensor out({m, n}, a.width());
  auto& o = out.raw();
  const auto aw = a.words();
  const auto bw = b.words();
  for (std::size_t i = 0; i < m; ++i) {
    std::uint64_t* row = o.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const std::uint64_t av = aw[i * k + p];
      if (av == 0) continue;
      const std::uint64_t* brow = bw.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  const auto msk = out.mask();
  for (auto& w : o) w &= msk;
  return out;
}

inline RingTensor transpose(const RingTensor& a) {
  QMPC_ENFORCE(a.shape().size() == 2, "transpose expects a 2-D tensor");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  RingTensor out({n, m}, a.width());
  auto& o = out.raw();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) o[j * m + i] = a[i * n + j];
  return out;
}

// Numpy-style broadcast of `a` to `shape` (right-aligned; dims equal or 1).
inline RingTensor broadcast_to(const RingTensor& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  const Shape& src = a.shape();
  QMPC_ENFORCE(src.size() <= shape.size(), "cannot broadcast ",
               shape_str(src), " to ", shape_str(shape));
  const std::size_t nd = shape.size();
  Shape padded(nd, 1);
  std::copy(src.begin(), src.end(), padded.begin() + (nd - src.size()));
  for (std::size_t d = 0; d < nd; ++d) {
    QMPC_ENFORCE(padded[d] == shape[d] || padded[d] == 1, "cannot broadcast ",
                 shape_str(src), " to ", shape_str(shape));
  }
  std::vector<std::size_t> src_stride(nd, 0);
  std::size_t stride = 1;
  for (std::size_t d = nd; d-- > 0;) {
    src_stride[d] = padded[d] == 1 ? 0 : stride;
    stride *= padded[d];
  }
  RingTensor out(shape, a.width());
  auto& o = out.raw();
  std::vector<std::size_t> idx(nd, 0);
  for (std::size_t flat = 0; flat < o.size(); ++flat) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < nd; ++d) off += idx[d] * src_stride[d];
    o[flat] = a[off];
    for (std::size_t d = nd; d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

// Result shape of broadcasting a against b.
inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t nd = std::max(a.size(), b.size());
  Shape out(nd, 1);
  for (std::size_t d = 0; d < nd; ++d) {
    const std::size_t da =
        d < nd - a.size() ? 1 : a[d - (nd - a.size())];
    const std::size_t db =
        d < nd - b.size() ? 1 : b[d - (nd - b.size())];
    QMPC_ENFORCE(da == db || da == 1 || db == 1, "incompatible shapes ",
                 shape_str(a), " and ", shape_str(b));
    out[d] = std::max(da, db);
  }
  return out;
}

// Sum over the last axis, keeping it as a size-1 dim.
inline RingTensor sum_last(const RingTensor& a) {
  const std::size_t rows = rows_of(a.shape()), cols = cols_of(a.shape());
  Shape shape = a.shape().empty() ? Shape{1} : a.shape();
  shape.back() = 1;
  RingTensor out(shape, a.width());
  for (std::size_t r = 0; r < rows; ++r) {
    std::uint64_t acc = 0;
    for (std::size_t c = 0; c < cols; ++c) acc += a[r * cols + c];
    out.set(r, acc);
  }
  return out;
}

// Columns [begin, end) of the last axis.
inline RingTensor slice_last(const RingTensor& a, std::size_t begin,
                             std::size_t end) {
  const std::size_t rows = rows_of(a.shape()), cols = cols_of(a.shape());
  QMPC_ENFORCE(begin < end && end <= cols, "slice [", begin, ",", end,
               ") out of range for ", cols, " columns");
  Shape shape = a.shape();
  shape.back() = end - begin;
  RingTensor out(shape, a.width());
  auto& o = out.raw();
  const std::size_t w = end - begin;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < w; ++c) o[r * w + c] = a[r * cols + begin + c];
  return out;
}

inline RingTensor concat_last(const std::vector<RingTensor>& parts) {
  QMPC_ENFORCE(!parts.empty(), "concat of nothing");
  const std::size_t rows = rows_of(parts[0].shape());
  std::size_t total = 0;
  for (const auto& p : parts) {
    QMPC_ENFORCE(rows_of(p.shape()) == rows && p.width() == parts[0].width(),
                 "concat operands disagree");
    total += cols_of(p.shape());
  }
  Shape shape = parts[0].shape();
  shape.back() = total;
  RingTensor out(shape, parts[0].width());
  auto& o = out.raw();
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t c = cols_of(p.shape());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < c; ++j) o[r * total + off + j] = p[r * c + j];
    off += c;
  }
  return out;
}

// Flat concatenation / split; used to batch independent tensors into a
// single protocol invocation.
inline RingTensor concat_flat(const std::vector<RingTensor>& parts) {
  QMPC_ENFORCE(!parts.empty(), "concat of nothing");
  std::vector<std::uint64_t> data;
  for (const auto& p : parts) {
    QMPC_ENFORCE(p.width() == parts[0].width(), "width mismatch in concat");
    data.insert(data.end(), p.words().begin(), p.words().end());
  }
  const std::size_t n = data.size();
  return RingTensor({n}, parts[0].width(), std::move(data));
}

inline std::vector<RingTensor> split_flat(const RingTensor& a,
                                          const std::vector<Shape>& shapes) {
  std::vector<RingTensor> out;
  std::size_t off = 0;
  for (const auto& s : shapes) {
    const std::size_t n = numel(s);
    QMPC_ENFORCE(off + n <= a.size(), "split overruns tensor");
    std::vector<std::uint64_t> data(a.words().begin() + off,
                                    a.words().begin() + off + n);
    out.emplace_back(s, a.width(), std::move(data));
    off += n;
  }
  QMPC_ENFORCE(off == a.size(), "split leaves trailing elements");
  return out;
}

}  // namespace ring

// ---------------------------------------------------------------------------
// Codec.

// Rounds half away from zero and saturates to the signed range of t.bits.
// `saturated`, when given, is incremented once per clipped value.
inline RingTensor encode(std::span<const double> values, Shape shape,
                         FxpType t, std::size_t* saturated = nullptr) {
  t.validate();
  QMPC_ENFORCE(values.size() == numel(shape), "value count ", values.size(),
               " does not match shape ", shape_str(shape));
  const long double hi = std::ldexp(1.0L, t.bits - 1) - 1;
  const long double lo = -std::ldexp(1.0L, t.bits - 1);
  RingTensor out(std::move(shape), t.bits);
  for (std::size_t i = 0; i < values.size(); ++i) {
    QMPC_ENFORCE(std::isfinite(values[i]), "non-finite input at ", i);
    long double v = std::roundl(std::ldexp(static_cast<long double>(values[i]),
                                           t.frac));
    if (v > hi || v < lo) {
      v = v > hi ? hi : lo;
      if (saturated) ++*saturated;
    }
    std::int64_t iv;
    if (v >= std::ldexp(1.0L, 63) - 1) {
      iv = INT64_MAX;
    } else {
      iv = static_cast<std::int64_t>(v);
    }
    out.set(i, from_signed(iv, t.bits));
  }
  return out;
}

inline RingTensor encode(std::span<const double> values, FxpType t) {
  return encode(values, Shape{values.size()}, t);
}

inline RingTensor encode_scalar(double v, FxpType t) {
  return encode(std::span<const double>(&v, 1), Shape{1}, t);
}

// Integer representation of a public real constant at precision `frac`.
inline std::int64_t fxp_const(double v, int frac) {
  return static_cast<std::int64_t>(std::llround(std::ldexp(v, frac)));
}

inline std::vector<double> decode(const RingTensor& x, FxpType t) {
  t.validate();
  if (x.width() != t.bits) {
    throw ConfigError(detail::concat("decode: tensor width ", x.width(),
                                     " does not match ", t.to_string()));
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::ldexp(static_cast<double>(x.signed_at(i)), -t.frac);
  }
  return out;
}

inline double decode_scalar(std::uint64_t word, FxpType t) {
  return std::ldexp(static_cast<double>(to_signed(word, t.bits)), -t.frac);
}

// Deterministic floor truncation of the signed interpretation.
inline RingTensor plain_trunc(const RingTensor& x, int shift) {
  QMPC_ENFORCE(shift >= 0 && shift < x.width(), "shift ", shift,
               " out of range for width ", x.width());
  return ring::ashr(x, shift);
}

}  // namespace qmpc
