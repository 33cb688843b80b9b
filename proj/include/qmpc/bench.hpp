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

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qmpc/model.hpp"

namespace qmpc::bench {

using Json = nlohmann::json;

// Pinned targets for the block benchmark.
inline constexpr double kBlockMaxAbs = 0.03125;  // 2^-5
inline constexpr double kCommRatioTarget = 0.67;

struct Check {
  std::string name;
  bool pass = false;
  double value = 0;
  std::string detail;

  Json to_json() const {
    Json j = {{"name", name}, {"pass", pass}, {"value", value}};
    if (!detail.empty()) j["detail"] = detail;
    return j;
  }
};

/// DITTO_SEED, when set, replaces the seed given on the command line.
inline std::uint64_t resolve_seed(std::uint64_t seed) {
  const char* env = std::getenv("DITTO_SEED");
  if (env == nullptr || *env == '\0') return seed;
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(env, &used, 0);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("DITTO_SEED is not an integer: '") + env + "'");
  }
}

/// Bytes per phase, grouped by the first `depth` path components.
inline std::vector<std::pair<std::string, std::uint64_t>> group_phases(
    const CommStats& c, int depth = 1) {
  std::map<std::string, std::uint64_t> agg;
  for (const auto& [path, bytes] : c.phase_bytes) {
    std::size_t cut = 0;
    for (int d = 0; d < depth && cut != std::string::npos; ++d)
      cut = path.find('/', d == 0 ? 0 : cut + 1);
    agg[path.substr(0, cut)] += bytes;
  }
  return {agg.begin(), agg.end()};
}

inline Json est_time_json(const CommStats& c) {
  return {{"lan", estimate_time(c, NetworkConfig::lan())},
          {"wan", estimate_time(c, NetworkConfig::wan())}};
}

inline NetworkConfig network(const std::string& name) {
  if (name == "lan") return NetworkConfig::lan();
  if (name == "wan") return NetworkConfig::wan();
  throw ConfigError("network must be lan or wan, got '" + name + "'");
}

struct Report {
  std::string cmd;
  Json params = Json::object();
  CommStats comm;
  std::vector<std::pair<std::string, std::uint64_t>> phases;
  Json results = Json::object();
  std::vector<Check> checks;

  void check(std::string name, bool pass, double value, std::string detail = {}) {
    checks.push_back({std::move(name), pass, value, std::move(detail)});
  }

  bool ok() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  Json to_json() const {
    Json comm_j = comm.to_json();
    comm_j["total_bytes"] = comm.total_bytes();
    Json ph = Json::array();
    for (const auto& [name, bytes] : phases) ph.push_back({{"name", name}, {"bytes", bytes}});
    Json ch = Json::array();
    for (const auto& c : checks) ch.push_back(c.to_json());
    return {{"cmd", cmd},       {"params", params},
            {"comm", comm_j},   {"phases", ph},
            {"est_time", est_time_json(comm)}, {"checks", ch},
            {"results", results}};
  }

  /// One "key,value" row per leaf, keyed by JSON pointer.
  std::string to_csv() const {
    std::string out = "key,value\n";
    const Json flat = to_json().flatten();
    for (const auto& [key, v] : flat.items()) {
      std::string val = v.is_string() ? v.get<std::string>() : v.dump();
      if (val.find_first_of(",\"\n") != std::string::npos) {
        std::string q = "\"";
        for (char c : val) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        val = q + "\"";
      }
      out += key + "," + val + "\n";
    }
    return out;
  }
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::vector<double> uniform(std::mt19937_64& rng, std::size_t n, double lo,
                                   double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace detail

// --- matmul ---------------------------------------------------------------------

struct MatmulParams {
  std::size_t m = 8, k = 768, n = 3072;
  int bits = 64;
  std::string net = "lan";
  std::uint64_t seed = 1;
};

/// Secure X[m,k] W[k,n] with truncation at fxp<32,8> or fxp<64,18>.
inline Report bench_matmul(const MatmulParams& prm) {
  if (prm.bits != 32 && prm.bits != 64)
    throw ConfigError("--bits must be 32 or 64, got " + std::to_string(prm.bits));
  if (prm.m == 0 || prm.k == 0 || prm.n == 0) throw ConfigError("matmul dimensions must be positive");
  const NetworkConfig net = network(prm.net);
  const FxpType t = prm.bits == 32 ? FxpType::low() : FxpType::high();

  Report rep;
  rep.cmd = "bench-matmul";
  rep.params = {{"m", prm.m}, {"k", prm.k},       {"n", prm.n},
                {"bits", prm.bits}, {"net", prm.net}, {"seed", prm.seed}};

  std::mt19937_64 rng(prm.seed);
  const double w = 1.0 / std::sqrt(static_cast<double>(prm.k));
  const auto xv = detail::uniform(rng, prm.m * prm.k, -1, 1);
  const auto wv = detail::uniform(rng, prm.k * prm.n, -w, w);
  const RingTensor x = encode(xv, {prm.m, prm.k}, t);
  const RingTensor wt = encode(wv, {prm.k, prm.n}, t);

  Session s(SessionOptions{.seed = prm.seed});
  const auto xs = share(x, t, s.client_rng());
  const auto ws = share(wt, t, s.client_rng());
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = s.run([&](Party& p) {
    PhaseScope ph(p, "matmul");
    return matmul_trunc(p, xs[p.id()], ws[p.id()]);
  });
  const double wall = detail::seconds_since(t0);
  rep.comm = s.stats();

  const std::uint64_t dot = rep.comm.bytes_in_phase("mul");
  const std::uint64_t tr = rep.comm.bytes_in_phase("trunc");
  const std::uint64_t casts =
      rep.comm.bytes_in_phase("upcast") + rep.comm.bytes_in_phase("downcast");
  rep.phases = {{"dot_product", dot}, {"truncation", tr}, {"casts", casts}};

  const auto got = oracle::from_ring(reveal(out), t);
  const auto want = oracle::matmul(oracle::from_ring(x, t), oracle::from_ring(wt, t));
  std::int64_t worst = 0;
  for (std::size_t i = 0; i < got.v.size(); ++i)
    worst = std::max(worst, std::abs(got.v[i] - want.v[i]));

  const double lan = estimate_time(rep.comm, NetworkConfig::lan());
  const double wan = estimate_time(rep.comm, NetworkConfig::wan());
  const double outs = static_cast<double>(prm.m * prm.n);
  rep.results = {{"time_s", estimate_time(rep.comm, net)},
                 {"wall_s", wall},
                 {"dot_product_bits_per_output", 8.0 * static_cast<double>(dot) / outs},
                 {"truncation_bits_per_output", 8.0 * static_cast<double>(tr) / outs}};
  rep.check("matches_oracle_ulp", worst <= oracle::slack("matmul"), static_cast<double>(worst));
  rep.check("wan_slower_than_lan", wan > lan, wan - lan);
  return rep;
}

// --- block ----------------------------------------------------------------------

struct BlockParams {
  model::BlockConfig config;
  std::string mode = "quantized";
  std::string weights;  // manifest path; random weights when empty
  std::uint64_t seed = 1;
  double input_range = 2.0;
};

inline graph::PrecisionMap precision_map(const std::string& mode) {
  if (mode == "quantized") return graph::PrecisionMap::quantized();
  if (mode == "uniform64") return graph::PrecisionMap::uniform64();
  throw ConfigError("mode must be quantized or uniform64, got '" + mode + "'");
}

/// Runs the block under both precision maps; `comm` and `phases` describe
/// the selected mode.
inline Report bench_block(const BlockParams& prm) {
  const model::BlockConfig& c = prm.config;
  c.validate();
  precision_map(prm.mode);

  Report rep;
  rep.cmd = "bench-block";
  rep.params = {{"config", c.to_json()},
                {"mode", prm.mode},
                {"weights", prm.weights.empty() ? Json("random") : Json(prm.weights)},
                {"seed", prm.seed},
                {"input_range", prm.input_range}};

  graph::Feeds feeds =
      prm.weights.empty() ? model::random_weights(c, prm.seed) : model::load_weights(prm.weights);
  model::check_weights(c, feeds);
  std::mt19937_64 rng(prm.seed ^ 0x9e3779b97f4a7c15ull);
  feeds["x"] = {{c.seq_len, c.d_model},
                detail::uniform(rng, c.seq_len * c.d_model, -prm.input_range, prm.input_range)};

  const graph::Graph block = model::build_block(c);
  Json modes = Json::object();
  CommStats selected;
  std::map<std::string, std::uint64_t> bytes;
  double max_abs = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (const std::string mode : {"quantized", "uniform64"}) {
    const graph::Graph g = graph::compile(block, precision_map(mode));
    Session s(SessionOptions{.seed = prm.seed});
    const auto sec = graph::execute(g, graph::Backend::kSecure, feeds, &s);
    bytes[mode] = sec.comm.total_bytes();
    modes[mode] = {{"bytes", sec.comm.total_bytes()},
                   {"rounds", sec.comm.rounds},
                   {"est_time", est_time_json(sec.comm)}};
    if (mode == prm.mode) {
      selected = sec.comm;
      const auto ref = graph::execute(g, graph::Backend::kPlaintext, feeds);
      max_abs = oracle::metrics(sec.outputs[0].data, ref.outputs[0].data).max_abs;
    }
  }
  const double ratio = static_cast<double>(bytes["quantized"]) /
                       static_cast<double>(bytes["uniform64"]);
  rep.comm = selected;
  rep.phases = group_phases(selected);
  rep.results = {{"modes", modes},
                 {"ratio", ratio},
                 {"max_abs_vs_oracle", max_abs},
                 {"wall_s", detail::seconds_since(t0)}};
  rep.check("max_abs_vs_oracle", max_abs <= kBlockMaxAbs, max_abs);
  rep.check("comm_ratio", ratio <= kCommRatioTarget, ratio);
  return rep;
}

// --- single op ------------------------------------------------------------------

struct OpParams {
  std::string op;
  Json input;  // {"inputs": [{"shape", "data"[, "type"]}], "attrs": {}}; random when null
  Shape shape{8, 10};
  std::string precision = "quantized";
  std::uint64_t seed = 1;
};

namespace detail {

inline std::pair<double, double> random_range(const std::string& op) {
  if (op == "exp") return {-16, 0};
  if (op == "div" || op == "recip" || op == "rsqrt") return {0.25, 8};
  return {-4, 4};
}

inline Json random_inputs(const std::string& op, const Shape& shape, std::mt19937_64& rng) {
  const auto [lo, hi] = random_range(op);
  auto tensor = [&](const Shape& s, double a, double b) {
    return Json{{"shape", s}, {"data", uniform(rng, numel(s), a, b)}};
  };
  Json ins = Json::array();
  if (op == "matmul") {
    QMPC_ENFORCE(shape.size() == 2, "matmul needs a 2-D shape");
    ins.push_back(tensor(shape, lo, hi));
    ins.push_back(tensor({shape[1], shape[0]}, lo / 4, hi / 4));
  } else if (op == "layernorm") {
    const Shape last{shape.back()};
    ins.push_back(tensor(shape, lo, hi));
    ins.push_back({{"shape", last}, {"data", std::vector<double>(shape.back(), 1.0)}, {"type", "nonlinear"}});
    ins.push_back({{"shape", last}, {"data", std::vector<double>(shape.back(), 0.0)}, {"type", "nonlinear"}});
  } else {
    const int arity = graph::op_info(op).min_arity;
    for (int i = 0; i < std::max(arity, 1); ++i) ins.push_back(tensor(shape, lo, hi));
  }
  return {{"inputs", ins}, {"attrs", Json::object()}};
}

// Float reference for single-input ops, empty when there is none.
inline std::vector<double> float_reference(const std::string& op, const graph::RealTensor& x) {
  std::vector<double> y(x.data.size());
  auto each = [&](auto f) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(x.data[i]);
    return y;
  };
  if (op == "exp") return each([](double v) { return std::exp(v); });
  if (op == "gelu_quad") return each(oracle::ref::gelu_quad);
  if (op == "gelu_poly") return each(oracle::ref::gelu_poly);
  if (op == "softmax") return oracle::ref::softmax(x.data, x.shape.back());
  return {};
}

}  // namespace detail

/// One op on shared inputs, checked against the plaintext oracle.
inline Report run_op(const OpParams& prm) {
  const graph::OpInfo& info = graph::op_info(prm.op);
  if (info.rule == graph::Rule::kSource || info.rule == graph::Rule::kConst)
    throw ConfigError("run-op needs a computing op, got '" + prm.op + "'");

  Report rep;
  rep.cmd = "run-op";
  std::mt19937_64 rng(prm.seed);
  const Json in = prm.input.is_null() ? detail::random_inputs(prm.op, prm.shape, rng) : prm.input;
  rep.params = {{"op", prm.op}, {"precision", prm.precision}, {"seed", prm.seed},
                {"input", prm.input.is_null() ? Json("random") : Json("file")}};

  graph::Graph g;
  graph::Feeds feeds;
  graph::Node node;
  node.id = "y";
  node.op = prm.op;
  try {
    const Json& ins = in.at("inputs");
    for (std::size_t i = 0; i < ins.size(); ++i) {
      const std::string id = "in" + std::to_string(i);
      const Shape shape = ins[i].at("shape").get<Shape>();
      Json attrs = {{"shape", shape}};
      if (ins[i].contains("type")) attrs["type"] = ins[i]["type"];
      g.nodes.push_back({id, "input", {}, attrs, {}, {}, {}});
      feeds[id] = {shape, ins[i].at("data").get<std::vector<double>>()};
      node.inputs.push_back(id);
    }
    node.attrs = in.value("attrs", Json::object());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad run-op input: ") + e.what());
  }
  g.nodes.push_back(node);
  g.outputs = {"y"};

  graph::PrecisionMap map = precision_map(prm.precision);
  const graph::Graph cg = graph::compile(g, map);
  Session s(SessionOptions{.seed = prm.seed});
  const auto sec = graph::execute(cg, graph::Backend::kSecure, feeds, &s);
  const auto ref = graph::execute(cg, graph::Backend::kPlaintext, feeds);
  rep.comm = sec.comm;
  rep.phases = group_phases(sec.comm, 2);

  const FxpType out_t = sec.types[0];
  const auto& got = sec.outputs[0].data;
  const auto m = oracle::metrics(got, ref.outputs[0].data);
  const double ulps = oracle::max_scaled_ulp(got, ref.outputs[0].data, out_t);
  int tol = 0;
  for (const auto& n : cg.nodes)
    if (n.op != "input" && n.op != "const") tol += oracle::slack(n.op);

  rep.results = {{"output_type", out_t.to_string()},
                 {"shape", sec.outputs[0].shape},
                 {"max_abs_vs_oracle", m.max_abs},
                 {"max_ulp_vs_oracle", ulps},
                 {"ulp_tolerance", tol}};
  if (feeds.size() == 1) {
    const auto fr = detail::float_reference(prm.op, feeds.begin()->second);
    if (!fr.empty()) rep.results["max_abs_vs_float"] = oracle::metrics(got, fr).max_abs;
  }
  rep.check("secure_vs_oracle_ulp", ulps <= tol, ulps);
  return rep;
}

}  // namespace qmpc::bench
