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

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "qmpc/graph.hpp"

namespace qmpc::model {

using graph::Feeds;
using graph::Graph;
using graph::Json;
using graph::Node;
using graph::RealTensor;

enum class GeluMode { kQuad, kPoly };
enum class MaskMode { kNone, kCausal };

struct BlockConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 2;
  std::size_t d_ff = 256;
  std::size_t seq_len = 16;
  GeluMode gelu = GeluMode::kQuad;
  MaskMode mask = MaskMode::kNone;

  std::size_t d_head() const { return d_model / n_heads; }

  void validate() const {
    if (d_model == 0 || n_heads == 0 || d_ff == 0 || seq_len == 0)
      throw ConfigError("block dimensions must be positive");
    if (d_model % n_heads != 0)
      throw ConfigError(::qmpc::detail::concat("d_model ", d_model,
                                               " is not divisible by n_heads ", n_heads));
  }

  Json to_json() const {
    return {{"d_model", d_model},
            {"n_heads", n_heads},
            {"d_ff", d_ff},
            {"seq_len", seq_len},
            {"gelu_mode", gelu == GeluMode::kQuad ? "quad" : "poly"},
            {"mask_mode", mask == MaskMode::kNone ? "none" : "causal"}};
  }

  static GeluMode parse_gelu(const std::string& s) {
    if (s == "quad") return GeluMode::kQuad;
    if (s == "poly") return GeluMode::kPoly;
    throw ConfigError("gelu_mode must be quad or poly, got '" + s + "'");
  }

  static MaskMode parse_mask(const std::string& s) {
    if (s == "none") return MaskMode::kNone;
    if (s == "causal") return MaskMode::kCausal;
    throw ConfigError("mask_mode must be none or causal, got '" + s + "'");
  }

  static BlockConfig from_json(const Json& j) {
    BlockConfig c;
    try {
      c.d_model = j.value("d_model", c.d_model);
      c.n_heads = j.value("n_heads", c.n_heads);
      c.d_ff = j.value("d_ff", c.d_ff);
      c.seq_len = j.value("seq_len", c.seq_len);
      if (j.contains("gelu_mode")) c.gelu = parse_gelu(j["gelu_mode"].get<std::string>());
      if (j.contains("mask_mode")) c.mask = parse_mask(j["mask_mode"].get<std::string>());
    } catch (const Json::exception& e) {
      throw ConfigError(std::string("bad block config: ") + e.what());
    }
    c.validate();
    return c;
  }

  static BlockConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    Json j;
    try {
      in >> j;
    } catch (const Json::exception& e) {
      throw ConfigError("cannot parse '" + path + "': " + e.what());
    }
    return from_json(j);
  }
};

/// Additive mask value for disallowed positions. exp clamps anything below
/// the threshold to zero, and -32 is still far inside the low ring.
inline constexpr double kMaskValue = params::kMaskValue;

namespace detail {

inline Json shape_json(std::initializer_list<std::size_t> s) {
  Json j = Json::array();
  for (auto d : s) j.push_back(d);
  return j;
}

struct Builder {
  Graph& g;
  std::string prefix;

  std::string add(const std::string& name, const std::string& op,
                  std::vector<std::string> in, Json attrs = Json::object()) {
    Node n;
    n.id = prefix + name;
    n.op = op;
    n.inputs = std::move(in);
    n.attrs = std::move(attrs);
    g.nodes.push_back(std::move(n));
    return g.nodes.back().id;
  }

  std::string weight(const std::string& name) {
    return add(name, "const", {}, {{"weight", prefix + name}});
  }

  // x @ w + b
  std::string linear(const std::string& name, const std::string& x) {
    const auto mm = add(name, "matmul", {x, weight("w" + name.substr(1))});
    return add(name + "_b", "add", {mm, weight("b" + name.substr(1))});
  }
};

inline std::string attention(Graph& g, const BlockConfig& c, const std::string& x,
                             const std::string& prefix) {
  Builder b{g, prefix};
  const auto q = b.linear("lq", x);
  const auto k = b.linear("lk", x);
  const auto v = b.linear("lv", x);
  std::string mask;
  if (c.mask == MaskMode::kCausal) {
    std::vector<double> m(c.seq_len * c.seq_len, 0.0);
    for (std::size_t i = 0; i < c.seq_len; ++i)
      for (std::size_t j = i + 1; j < c.seq_len; ++j) m[i * c.seq_len + j] = kMaskValue;
    mask = b.add("mask", "const", {},
                 {{"value", m}, {"shape", shape_json({c.seq_len, c.seq_len})}});
  }
  const std::size_t dh = c.d_head();
  std::vector<std::string> heads;
  for (std::size_t h = 0; h < c.n_heads; ++h) {
    const std::string s = "h" + std::to_string(h) + ".";
    const Json cols = {{"begin", h * dh}, {"end", (h + 1) * dh}};
    const auto qh = b.add(s + "q", "slice", {q}, cols);
    const auto kh = b.add(s + "k", "slice", {k}, cols);
    const auto vh = b.add(s + "v", "slice", {v}, cols);
    const auto kt = b.add(s + "kt", "transpose", {kh});
    const auto sc = b.add(s + "scores", "matmul", {qh, kt});
    std::string logits = b.add(s + "scaled", "scale", {sc},
                               {{"factor", 1.0 / std::sqrt(static_cast<double>(dh))}});
    if (!mask.empty()) logits = b.add(s + "masked", "add", {logits, mask});
    const auto p = b.add(s + "probs", "softmax", {logits});
    heads.push_back(b.add(s + "ctx", "matmul", {p, vh}));
  }
  const auto ctx = heads.size() == 1 ? heads[0] : b.add("ctx", "concat", heads);
  return b.linear("lo", ctx);
}

inline std::string ffn(Graph& g, const BlockConfig& c, const std::string& x,
                       const std::string& prefix) {
  Builder b{g, prefix};
  const auto h = b.linear("l1", x);
  const auto a = b.add("act", c.gelu == GeluMode::kQuad ? "gelu_quad" : "gelu_poly", {h});
  return b.linear("l2", a);
}

inline Graph with_input(const BlockConfig& c) {
  c.validate();
  Graph g;
  Node x;
  x.id = "x";
  x.op = "input";
  x.attrs = {{"shape", shape_json({c.seq_len, c.d_model})}};
  g.nodes.push_back(x);
  return g;
}

}  // namespace detail

/// Multi-head self-attention on input "x" [seq_len, d_model]. Weights:
/// attn.w{q,k,v,o} [d_model, d_model] and attn.b{q,k,v,o} [d_model].
inline Graph build_attention(const BlockConfig& c) {
  Graph g = detail::with_input(c);
  g.outputs = {detail::attention(g, c, "x", "attn.")};
  return g;
}

/// Linear -> GeLU -> Linear. Weights: ffn.w1 [d_model, d_ff], ffn.b1 [d_ff],
/// ffn.w2 [d_ff, d_model], ffn.b2 [d_model].
inline Graph build_ffn(const BlockConfig& c) {
  Graph g = detail::with_input(c);
  g.outputs = {detail::ffn(g, c, "x", "ffn.")};
  return g;
}

/// Post-norm block: h = LN1(x + attn(x)); y = LN2(h + ffn(h)).
/// Extra weights: ln1.g, ln1.b, ln2.g, ln2.b [d_model].
inline Graph build_block(const BlockConfig& c) {
  Graph g = detail::with_input(c);
  detail::Builder b{g, ""};
  const auto a = detail::attention(g, c, "x", "attn.");
  const auto r1 = b.add("res1", "add", {"x", a});
  const auto h = b.add("ln1", "layernorm", {r1, b.weight("ln1.g"), b.weight("ln1.b")});
  const auto f = detail::ffn(g, c, h, "ffn.");
  const auto r2 = b.add("res2", "add", {h, f});
  g.outputs = {b.add("ln2", "layernorm", {r2, b.weight("ln2.g"), b.weight("ln2.b")})};
  return g;
}

/// Names and shapes of every weight the block expects.
inline std::vector<std::pair<std::string, Shape>> weight_specs(const BlockConfig& c) {
  const std::size_t d = c.d_model, f = c.d_ff;
  std::vector<std::pair<std::string, Shape>> s;
  for (const char* p : {"q", "k", "v", "o"}) {
    s.push_back({std::string("attn.w") + p, {d, d}});
    s.push_back({std::string("attn.b") + p, {d}});
  }
  s.push_back({"ffn.w1", {d, f}});
  s.push_back({"ffn.b1", {f}});
  s.push_back({"ffn.w2", {f, d}});
  s.push_back({"ffn.b2", {d}});
  for (const char* p : {"ln1", "ln2"}) {
    s.push_back({std::string(p) + ".g", {d}});
    s.push_back({std::string(p) + ".b", {d}});
  }
  return s;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) matrices, small biases and
/// layernorm gains near one.
inline Feeds random_weights(const BlockConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Feeds w;
  for (const auto& [name, shape] : weight_specs(c)) {
    RealTensor t{shape, std::vector<double>(numel(shape))};
    double lo = -0.1, hi = 0.1;
    if (shape.size() == 2) {
      const double a = 1.0 / std::sqrt(static_cast<double>(shape[0]));
      lo = -a;
      hi = a;
    } else if (name.ends_with(".g")) {
      lo = 0.8;
      hi = 1.2;
    }
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.data) v = dist(rng);
    w[name] = std::move(t);
  }
  return w;
}

inline Feeds zero_weights(const BlockConfig& c) {
  Feeds w;
  for (const auto& [name, shape] : weight_specs(c)) {
    RealTensor t{shape, std::vector<double>(numel(shape), 0.0)};
    if (name.ends_with(".g")) std::fill(t.data.begin(), t.data.end(), 1.0);
    w[name] = std::move(t);
  }
  return w;
}

// --- weight files -------------------------------------------------------------
//
// Manifest (JSON):
//   {"format": "qmpc-weights", "version": 1, "dtype": "float32-le",
//    "blob": "<file next to the manifest>",
//    "tensors": [{"name": .., "shape": [..], "offset": <byte offset>}, ..]}
// The blob holds the tensors back to back as little-endian float32, row-major.

namespace detail {

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
  return v;
}

}  // namespace detail

inline void save_weights(const Feeds& w, const std::string& manifest_path,
                         const std::string& blob_name) {
  namespace fs = std::filesystem;
  const fs::path manifest(manifest_path);
  const fs::path blob = manifest.parent_path() / blob_name;
  std::ofstream out(blob, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + blob.string() + "'");
  Json tensors = Json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : w) {
    Json shape = Json::array();
    for (auto d : t.shape) shape.push_back(d);
    tensors.push_back({{"name", name}, {"shape", shape}, {"offset", offset}});
    for (double v : t.data) {
      const float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      bits = detail::to_le(bits);
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
    offset += 4 * t.data.size();
  }
  const Json j = {{"format", "qmpc-weights"}, {"version", 1}, {"dtype", "float32-le"},
                  {"blob", blob_name}, {"tensors", tensors}};
  std::ofstream m(manifest);
  if (!m) throw ConfigError("cannot write '" + manifest_path + "'");
  m << j.dump(2) << "\n";
}

inline Feeds load_weights(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("cannot open weight manifest '" + manifest_path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("cannot parse '" + manifest_path + "': " + e.what());
  }
  if (j.value("format", "") != "qmpc-weights" || j.value("dtype", "") != "float32-le")
    throw ConfigError("'" + manifest_path + "' is not a float32-le qmpc weight manifest");
  const fs::path blob = fs::path(manifest_path).parent_path() / j.at("blob").get<std::string>();
  std::ifstream b(blob, std::ios::binary);
  if (!b) throw ConfigError("cannot open weight blob '" + blob.string() + "'");
  const std::vector<char> bytes((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  Feeds w;
  for (const auto& t : j.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    Shape shape;
    for (const auto& d : t.at("shape")) shape.push_back(d.get<std::size_t>());
    const std::size_t off = t.at("offset").get<std::size_t>();
    const std::size_t n = numel(shape);
    if (off + 4 * n > bytes.size())
      throw ConfigError("tensor '" + name + "' runs past the end of the blob");
    RealTensor rt{shape, std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + off + 4 * i, 4);
      bits = detail::to_le(bits);
      float f;
      std::memcpy(&f, &bits, 4);
      rt.data[i] = f;
    }
    w[name] = std::move(rt);
  }
  return w;
}

/// Checks that `w` has every weight of `c` with the right shape.
inline void check_weights(const BlockConfig& c, const Feeds& w) {
  for (const auto& [name, shape] : weight_specs(c)) {
    const auto it = w.find(name);
    if (it == w.end()) throw ConfigError("missing weight '" + name + "'");
    if (it->second.shape != shape)
      throw ConfigError("weight '" + name + "' has shape " + shape_str(it->second.shape) +
                        ", expected " + shape_str(shape));
  }
}

}  // namespace qmpc::model
