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
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qmpc/nonlinear.hpp"
#include "qmpc/oracle.hpp"
#include "qmpc/party.hpp"
#include "qmpc/rss.hpp"
#include "qmpc/typecast.hpp"

namespace qmpc::graph {

using Json = nlohmann::json;

class GraphError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Layer category -> fixed-point type.
struct PrecisionMap {
  FxpType linear = FxpType::low();
  FxpType nonlinear = FxpType::high();
  FxpType head = FxpType::high();

  static PrecisionMap quantized() { return {}; }
  static PrecisionMap uniform64() {
    return {FxpType::high(), FxpType::high(), FxpType::high()};
  }

  FxpType of(const std::string& category) const {
    if (category == "linear") return linear;
    if (category == "nonlinear") return nonlinear;
    if (category == "head") return head;
    throw GraphError("unknown precision category '" + category + "'");
  }

  void validate() const {
    linear.validate();
    nonlinear.validate();
    head.validate();
  }

  Json to_json() const {
    return {{"linear", linear.to_string()},
            {"nonlinear", nonlinear.to_string()},
            {"head", head.to_string()}};
  }

  static PrecisionMap from_json(const Json& j) {
    if (j.is_string()) {
      const auto name = j.get<std::string>();
      if (name == "quantized") return quantized();
      if (name == "uniform64") return uniform64();
      throw GraphError("unknown precision preset '" + name + "'");
    }
    PrecisionMap m;
    if (j.contains("linear")) m.linear = FxpType::parse(j["linear"].get<std::string>());
    if (j.contains("nonlinear"))
      m.nonlinear = FxpType::parse(j["nonlinear"].get<std::string>());
    if (j.contains("head")) m.head = FxpType::parse(j["head"].get<std::string>());
    m.validate();
    return m;
  }
};

struct Node {
  std::string id;
  std::string op;
  std::vector<std::string> inputs;
  Json attrs = Json::object();
  std::optional<FxpType> input_type;
  std::optional<FxpType> compute_type;
  std::optional<FxpType> output_type;

  bool typed() const { return input_type && compute_type && output_type; }
};

struct Graph {
  std::vector<Node> nodes;
  std::vector<std::string> outputs;
  // Type every graph output must carry; set by infer_types.
  std::optional<FxpType> output_type;

  const Node* find(const std::string& id) const {
    for (const auto& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }
  const Node& at(const std::string& id) const {
    const Node* n = find(id);
    if (!n) throw GraphError("no node '" + id + "'");
    return *n;
  }
  std::size_t count(const std::string& op) const {
    return static_cast<std::size_t>(std::count_if(
        nodes.begin(), nodes.end(), [&](const Node& n) { return n.op == op; }));
  }
};

// --- op table ---------------------------------------------------------------

enum class Rule {
  kSource,    // input: declared type
  kConst,     // typed by its first consumer
  kCategory,  // fixed type from the precision map
  kJoin,      // widest type among its non-constant inputs
  kPass,      // type of its first input
  kFused,     // io at the linear type, internals at the nonlinear type
  kCast,      // explicit conversion to attrs.to
};

struct OpInfo {
  int min_arity;
  int max_arity;  // -1: unbounded
  Rule rule;
  const char* category;
};

inline const std::map<std::string, OpInfo>& op_table() {
  static const std::map<std::string, OpInfo> t = {
      {"input", {0, 0, Rule::kSource, "linear"}},
      {"const", {0, 0, Rule::kConst, "linear"}},
      {"matmul", {2, 2, Rule::kCategory, "linear"}},
      {"add", {2, 2, Rule::kJoin, "linear"}},
      {"sub", {2, 2, Rule::kJoin, "linear"}},
      {"mul", {2, 2, Rule::kJoin, "linear"}},
      {"scale", {1, 1, Rule::kPass, "linear"}},
      {"div", {2, 2, Rule::kCategory, "nonlinear"}},
      {"exp", {1, 1, Rule::kCategory, "nonlinear"}},
      {"gelu_quad", {1, 1, Rule::kCategory, "linear"}},
      {"gelu_poly", {1, 1, Rule::kCategory, "nonlinear"}},
      {"softmax", {1, 1, Rule::kFused, "linear"}},
      {"layernorm", {3, 3, Rule::kFused, "linear"}},
      {"transpose", {1, 1, Rule::kPass, "linear"}},
      {"reshape", {1, 1, Rule::kPass, "linear"}},
      {"slice", {1, 1, Rule::kPass, "linear"}},
      {"concat", {1, -1, Rule::kJoin, "linear"}},
      {"reduce_max", {1, 1, Rule::kPass, "linear"}},
      {"reduce_sum", {1, 1, Rule::kPass, "linear"}},
      {"upcast", {1, 1, Rule::kCast, "linear"}},
      {"downcast", {1, 1, Rule::kCast, "linear"}},
      {"rescale", {1, 1, Rule::kCast, "linear"}},
  };
  return t;
}

inline const OpInfo& op_info(const std::string& op) {
  const auto it = op_table().find(op);
  if (it == op_table().end()) throw GraphError("unsupported op '" + op + "'");
  return it->second;
}

inline bool is_cast(const Node& n) { return op_info(n.op).rule == Rule::kCast; }

inline std::string category_of(const Node& n) {
  if (n.attrs.contains("precision")) return n.attrs["precision"].get<std::string>();
  return op_info(n.op).category;
}

// Type the consumer expects on input `idx`; layernorm takes g and b at its
// compute type.
inline FxpType expected_input_type(const Node& n, std::size_t idx) {
  QMPC_ENFORCE(n.typed(), "node ", n.id, " is untyped");
  if (n.op == "layernorm" && idx > 0) return *n.compute_type;
  return *n.input_type;
}

inline FxpType join(FxpType a, FxpType b) {
  if (a.bits != b.bits) return a.bits > b.bits ? a : b;
  return a.frac >= b.frac ? a : b;
}

// --- structure ----------------------------------------------------------------

namespace detail {

inline std::map<std::string, std::size_t> index_of(const Graph& g) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (!idx.emplace(g.nodes[i].id, i).second)
      throw GraphError("duplicate node id '" + g.nodes[i].id + "'");
  }
  return idx;
}

inline void check_id(const std::string& id) {
  static const std::regex ok(R"([A-Za-z0-9_.:@\-]+)");
  if (!std::regex_match(id, ok)) throw GraphError("bad node id '" + id + "'");
}

}  // namespace detail

/// Structural checks: unique ids, known ops, arity, existing inputs, acyclic.
/// Returns node indices in a deterministic topological order (ties broken by
/// file order).
inline std::vector<std::size_t> topo_order(const Graph& g) {
  const auto idx = detail::index_of(g);
  const std::size_t n = g.nodes.size();
  std::vector<std::size_t> indeg(n, 0);
  std::vector<std::vector<std::size_t>> users(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = g.nodes[i];
    detail::check_id(node.id);
    const OpInfo& info = op_info(node.op);
    const int arity = static_cast<int>(node.inputs.size());
    if (arity < info.min_arity || (info.max_arity >= 0 && arity > info.max_arity))
      throw GraphError(::qmpc::detail::concat("node '", node.id, "' (", node.op,
                                      ") has ", arity, " inputs"));
    for (const auto& in : node.inputs) {
      const auto it = idx.find(in);
      if (it == idx.end())
        throw GraphError("node '" + node.id + "' reads missing input '" + in + "'");
      ++indeg[i];
      users[it->second].push_back(i);
    }
  }
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.insert(i);
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t i = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(i);
    for (std::size_t u : users[i])
      if (--indeg[u] == 0) ready.insert(u);
  }
  if (order.size() != n) throw GraphError("graph has a cycle");
  for (const auto& o : g.outputs)
    if (!idx.count(o)) throw GraphError("missing output '" + o + "'");
  return order;
}

// --- typing -----------------------------------------------------------------

/// Annotates every node with input/compute/output types under `map`.
/// Existing annotations are recomputed, so the pass is repeatable.
inline Graph infer_types(Graph g, const PrecisionMap& map) {
  map.validate();
  const auto order = topo_order(g);
  const auto idx = detail::index_of(g);
  auto producer = [&](const std::string& id) -> Node& { return g.nodes[idx.at(id)]; };

  for (std::size_t i : order) {
    Node& n = g.nodes[i];
    const OpInfo& info = op_info(n.op);
    std::optional<FxpType> t;
    switch (info.rule) {
      case Rule::kSource:
        if (n.attrs.contains("type")) {
          const auto s = n.attrs["type"].get<std::string>();
          t = (s == "linear" || s == "nonlinear" || s == "head") ? map.of(s)
                                                                 : FxpType::parse(s);
        } else {
          t = map.linear;
        }
        break;
      case Rule::kConst:
        continue;  // typed once its consumers are known
      case Rule::kCategory:
        t = map.of(category_of(n));
        break;
      case Rule::kJoin:
        for (const auto& in : n.inputs) {
          const Node& p = producer(in);
          if (p.op == "const") continue;
          t = t ? join(*t, *p.output_type) : *p.output_type;
        }
        if (!t || n.attrs.contains("precision")) t = map.of(category_of(n));
        break;
      case Rule::kPass: {
        const Node& p = producer(n.inputs[0]);
        t = p.op == "const" ? map.of(category_of(n)) : *p.output_type;
        break;
      }
      case Rule::kFused:
        n.input_type = n.output_type = map.of(category_of(n));
        n.compute_type = map.nonlinear;
        continue;
      case Rule::kCast: {
        const Node& p = producer(n.inputs[0]);
        if (!n.attrs.contains("to"))
          throw GraphError("cast node '" + n.id + "' lacks attrs.to");
        n.input_type = n.compute_type =
            p.op == "const" ? map.linear : *p.output_type;
        n.output_type = FxpType::parse(n.attrs["to"].get<std::string>());
        continue;
      }
    }
    n.input_type = n.compute_type = n.output_type = t;
  }

  // Constants take the type their first consumer expects.
  for (std::size_t i : order) {
    const Node& n = g.nodes[i];
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      Node& p = producer(n.inputs[k]);
      if (p.op != "const" || p.output_type) continue;
      const FxpType t = n.op == "const" ? map.linear : expected_input_type(n, k);
      p.input_type = p.compute_type = p.output_type = t;
    }
  }
  for (Node& n : g.nodes)
    if (!n.output_type) n.input_type = n.compute_type = n.output_type = map.linear;
  g.output_type = map.linear;
  return g;
}

inline std::string cast_op_for(FxpType from, FxpType to) {
  if (to.bits > from.bits) return "upcast";
  if (to.bits < from.bits) return "downcast";
  return "rescale";
}

// Outputs must leave at the graph output type unless they are explicit casts
// or belong to the prediction head.
inline bool output_exempt(const Node& n) {
  return is_cast(n) || category_of(n) == "head";
}

struct CastOptions {
  // Rounding recorded on inserted downcasts (attrs.rounding). Truncation
  // keeps nonnegative values nonnegative at the price of two rounds.
  Rounding downcast = Rounding::kTrunc;
};

/// Inserts one cast per (producer, target type) on every mismatched edge and
/// on graph outputs whose type differs from the graph output type. A graph
/// that is already consistent comes back unchanged.
inline Graph insert_casts(const Graph& typed, const CastOptions& opts = {}) {
  for (const auto& n : typed.nodes)
    if (!n.typed()) throw GraphError("insert_casts needs a typed graph; '" + n.id + "' is not");
  const auto order = topo_order(typed);
  std::set<std::string> used;
  for (const auto& n : typed.nodes) used.insert(n.id);

  Graph out;
  out.output_type = typed.output_type;
  std::map<std::string, FxpType> type_of;
  std::map<std::pair<std::string, std::string>, std::string> made;  // (src, type) -> cast id

  auto cast_to = [&](const std::string& src, FxpType want) -> std::string {
    const FxpType have = type_of.at(src);
    if (have == want) return src;
    const auto key = std::make_pair(src, want.to_string());
    if (const auto it = made.find(key); it != made.end()) return it->second;
    std::string id = ::qmpc::detail::concat(src, "@", want.bits, "_", want.frac);
    while (used.count(id)) id += "_";
    used.insert(id);
    Node c;
    c.id = id;
    c.op = cast_op_for(have, want);
    c.inputs = {src};
    c.attrs = {{"to", want.to_string()}};
    if (c.op == "downcast")
      c.attrs["rounding"] = opts.downcast == Rounding::kTrunc ? "trunc" : "floor";
    c.input_type = c.compute_type = have;
    c.output_type = want;
    out.nodes.push_back(c);
    type_of[id] = want;
    made[key] = id;
    return id;
  };

  for (std::size_t i : order) {
    Node n = typed.nodes[i];
    for (std::size_t k = 0; k < n.inputs.size(); ++k)
      n.inputs[k] = cast_to(n.inputs[k], expected_input_type(n, k));
    type_of[n.id] = *n.output_type;
    out.nodes.push_back(std::move(n));
  }
  for (const auto& o : typed.outputs) {
    const Node& n = typed.at(o);
    out.outputs.push_back(typed.output_type && !output_exempt(n)
                              ? cast_to(o, *typed.output_type)
                              : o);
  }
  return out;
}

inline Graph compile(const Graph& g, const PrecisionMap& map,
                     const CastOptions& opts = {}) {
  return insert_casts(infer_types(g, map), opts);
}

/// Type soundness check. Returns one message per violation; empty means valid.
inline std::vector<std::string> validate(const Graph& g) {
  std::vector<std::string> issues;
  try {
    topo_order(g);
  } catch (const GraphError& e) {
    issues.emplace_back(e.what());
    return issues;
  }
  for (const auto& n : g.nodes) {
    if (!n.typed()) {
      issues.push_back("node '" + n.id + "' is untyped");
      continue;
    }
    if (is_cast(n)) {
      const FxpType to = FxpType::parse(n.attrs.value("to", std::string("?")));
      if (to != *n.output_type)
        issues.push_back("cast '" + n.id + "' output type disagrees with attrs.to");
      if (cast_op_for(*n.input_type, to) != n.op)
        issues.push_back("cast '" + n.id + "' should be " + cast_op_for(*n.input_type, to));
    }
  }
  if (!issues.empty()) return issues;
  for (const auto& n : g.nodes)
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const Node& p = g.at(n.inputs[k]);
      const FxpType want = expected_input_type(n, k);
      if (*p.output_type != want)
        issues.push_back(::qmpc::detail::concat("edge ", p.id, " -> ", n.id, ": ",
                                        p.output_type->to_string(), " != ",
                                        want.to_string()));
    }
  if (g.output_type) {
    for (const auto& o : g.outputs) {
      const Node& n = g.at(o);
      if (!output_exempt(n) && *n.output_type != *g.output_type)
        issues.push_back("output '" + o + "' is " + n.output_type->to_string() +
                         ", expected " + g.output_type->to_string());
    }
  }
  return issues;
}

inline bool is_valid(const Graph& g) { return validate(g).empty(); }

// --- serialization ----------------------------------------------------------

inline Json to_json(const Graph& g) {
  Json nodes = Json::array();
  for (const auto& n : g.nodes) {
    Json j = {{"id", n.id}, {"op", n.op}, {"inputs", n.inputs}};
    if (!n.attrs.empty()) j["attrs"] = n.attrs;
    if (n.typed())
      j["types"] = {{"input", n.input_type->to_string()},
                    {"compute", n.compute_type->to_string()},
                    {"output", n.output_type->to_string()}};
    nodes.push_back(std::move(j));
  }
  Json out = {{"nodes", nodes}, {"outputs", g.outputs}};
  if (g.output_type) out["output_type"] = g.output_type->to_string();
  return out;
}

inline Graph from_json(const Json& j) {
  Graph g;
  try {
    for (const auto& jn : j.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<std::string>();
      n.op = jn.at("op").get<std::string>();
      if (jn.contains("inputs")) n.inputs = jn["inputs"].get<std::vector<std::string>>();
      if (jn.contains("attrs")) n.attrs = jn["attrs"];
      if (jn.contains("types")) {
        const auto& t = jn["types"];
        n.input_type = FxpType::parse(t.at("input").get<std::string>());
        n.compute_type = FxpType::parse(t.at("compute").get<std::string>());
        n.output_type = FxpType::parse(t.at("output").get<std::string>());
      }
      g.nodes.push_back(std::move(n));
    }
    if (j.contains("outputs")) g.outputs = j["outputs"].get<std::vector<std::string>>();
    if (j.contains("output_type"))
      g.output_type = FxpType::parse(j["output_type"].get<std::string>());
  } catch (const Json::exception& e) {
    throw GraphError(std::string("malformed graph JSON: ") + e.what());
  }
  topo_order(g);
  return g;
}

inline Graph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open graph file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw GraphError("cannot parse '" + path + "': " + e.what());
  }
  return from_json(j);
}

/// One line per node in topological order:
///   id = op(in0, in1) [input -> compute -> output] {attrs}
/// followed by "outputs a b" and, when set, "output_type fxp<..>".
inline std::string dump(const Graph& g) {
  std::ostringstream os;
  for (std::size_t i : topo_order(g)) {
    const Node& n = g.nodes[i];
    os << n.id << " = " << n.op << "(";
    for (std::size_t k = 0; k < n.inputs.size(); ++k)
      os << (k ? ", " : "") << n.inputs[k];
    os << ")";
    if (n.typed())
      os << " [" << n.input_type->to_string() << " -> "
         << n.compute_type->to_string() << " -> " << n.output_type->to_string()
         << "]";
    if (!n.attrs.empty()) os << " " << n.attrs.dump();
    os << "\n";
  }
  os << "outputs";
  for (const auto& o : g.outputs) os << " " << o;
  os << "\n";
  if (g.output_type) os << "output_type " << g.output_type->to_string() << "\n";
  return os.str();
}

inline Graph parse_dump(const std::string& text) {
  static const std::regex line_re(
      R"(^(\S+) = (\w+)\(([^)]*)\)(?: \[(\S+) -> (\S+) -> (\S+)\])?(?: (\{.*\}))?$)");
  Graph g;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("outputs", 0) == 0) {
      std::istringstream ls(line.substr(7));
      std::string o;
      while (ls >> o) g.outputs.push_back(o);
      continue;
    }
    if (line.rfind("output_type ", 0) == 0) {
      g.output_type = FxpType::parse(line.substr(12));
      continue;
    }
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) throw GraphError("bad dump line: " + line);
    Node n;
    n.id = m[1];
    n.op = m[2];
    std::istringstream ins(m[3].str());
    std::string tok;
    while (std::getline(ins, tok, ',')) {
      tok.erase(0, tok.find_first_not_of(' '));
      if (!tok.empty()) n.inputs.push_back(tok);
    }
    if (m[4].matched) {
      n.input_type = FxpType::parse(m[4].str());
      n.compute_type = FxpType::parse(m[5].str());
      n.output_type = FxpType::parse(m[6].str());
    }
    if (m[7].matched) n.attrs = Json::parse(m[7].str());
    g.nodes.push_back(std::move(n));
  }
  topo_order(g);
  return g;
}

// --- execution ----------------------------------------------------------------

struct RealTensor {
  Shape shape;
  std::vector<double> data;
};

// Graph inputs by node id and named weights referenced by const nodes.
using Feeds = std::map<std::string, RealTensor>;

enum class Backend { kSecure, kPlaintext };

struct ExecResult {
  std::vector<std::string> names;
  std::vector<RealTensor> outputs;
  std::vector<FxpType> types;
  CommStats comm;

  const RealTensor& output(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return outputs[i];
    throw GraphError("no output '" + name + "'");
  }
};

namespace detail {

inline Shape shape_from_json(const Json& j) {
  Shape s;
  for (const auto& d : j) s.push_back(d.get<std::size_t>());
  return s;
}

inline RealTensor source_value(const Node& n, const Feeds& feeds) {
  RealTensor v;
  if (n.op == "input") {
    const auto it = feeds.find(n.id);
    if (it == feeds.end()) throw GraphError("no feed for input '" + n.id + "'");
    v = it->second;
    if (n.attrs.contains("shape") && shape_from_json(n.attrs["shape"]) != v.shape)
      throw GraphError("feed for '" + n.id + "' has shape " + shape_str(v.shape));
  } else if (n.attrs.contains("weight")) {
    const auto name = n.attrs["weight"].get<std::string>();
    const auto it = feeds.find(name);
    if (it == feeds.end()) throw GraphError("no weight '" + name + "' for '" + n.id + "'");
    v = it->second;
  } else if (n.attrs.contains("value")) {
    const Json& val = n.attrs["value"];
    if (val.is_number()) {
      v.data = {val.get<double>()};
    } else {
      v.data = val.get<std::vector<double>>();
    }
    v.shape = n.attrs.contains("shape") ? shape_from_json(n.attrs["shape"])
                                        : Shape{v.data.size()};
  } else {
    throw GraphError("const '" + n.id + "' needs attrs.value or attrs.weight");
  }
  if (numel(v.shape) != v.data.size())
    throw GraphError("tensor for '" + n.id + "' does not match its shape");
  return v;
}

inline Rounding rounding_of(const Node& n) {
  const auto r = n.attrs.value("rounding", std::string("floor"));
  if (r == "floor") return Rounding::kFloor;
  if (r == "trunc") return Rounding::kTrunc;
  throw GraphError("unknown rounding '" + r + "' on '" + n.id + "'");
}

inline RssShare bcast(const RssShare& x, const Shape& s) {
  return x.shape() == s ? x : broadcast_to(x, s);
}

inline RssShare eval_secure(Party& p, const Node& n,
                            const std::vector<RssShare>& in) {
  const std::string& op = n.op;
  if (is_cast(n)) return cast(p, in[0], *n.output_type, rounding_of(n));
  PhaseScope ph(p, op);
  if (op == "matmul") return matmul_trunc(p, in[0], in[1]);
  if (op == "add" || op == "sub" || op == "mul") {
    const Shape s = ring::broadcast_shape(in[0].shape(), in[1].shape());
    const RssShare a = bcast(in[0], s), b = bcast(in[1], s);
    if (op == "add") return add(a, b);
    if (op == "sub") return sub(a, b);
    return mul_trunc(p, a, b);
  }
  if (op == "div") {
    const RssShare r = recip(p, in[1]);
    return mul_trunc(p, in[0], bcast(r, in[0].shape()));
  }
  if (op == "scale") return scale(p, in[0], n.attrs.at("factor").get<double>());
  if (op == "exp") return exp_neg(p, in[0]);
  if (op == "gelu_quad") return gelu_quad(p, in[0]);
  if (op == "gelu_poly") return gelu_poly(p, in[0]);
  if (op == "softmax") return softmax(p, in[0], *n.compute_type, *n.output_type);
  if (op == "layernorm")
    return layernorm(p, in[0], in[1], in[2],
                     n.attrs.value("eps", params::kLayerNormEps), *n.compute_type,
                     *n.output_type);
  if (op == "transpose") return transpose(in[0]);
  if (op == "reshape") return reshape(in[0], shape_from_json(n.attrs.at("shape")));
  if (op == "slice")
    return slice_last(in[0], n.attrs.at("begin").get<std::size_t>(),
                      n.attrs.at("end").get<std::size_t>());
  if (op == "concat") return concat_last(in);
  if (op == "reduce_max") return max_last(p, in[0]);
  if (op == "reduce_sum") return sum_last(in[0]);
  throw GraphError("op '" + op + "' cannot be executed");
}

inline oracle::Tensor eval_plain(const Node& n, const std::vector<oracle::Tensor>& in) {
  namespace o = oracle;
  const std::string& op = n.op;
  if (is_cast(n)) return o::cast(in[0], *n.output_type);
  if (op == "matmul") return o::matmul(in[0], in[1]);
  if (op == "add") return o::add(in[0], in[1]);
  if (op == "sub") return o::sub(in[0], in[1]);
  if (op == "mul") return o::mul(in[0], in[1]);
  if (op == "div") return o::mul(in[0], o::broadcast(o::recip(in[1]), in[0].shape));
  if (op == "scale") return o::scale(in[0], n.attrs.at("factor").get<double>());
  if (op == "exp") return o::exp_neg(in[0]);
  if (op == "gelu_quad") return o::gelu_quad(in[0]);
  if (op == "gelu_poly") return o::gelu_poly(in[0]);
  if (op == "softmax") return o::softmax(in[0], *n.compute_type, *n.output_type);
  if (op == "layernorm")
    return o::layernorm(in[0], in[1], in[2],
                        n.attrs.value("eps", params::kLayerNormEps),
                        *n.compute_type, *n.output_type);
  if (op == "transpose") return o::transpose(in[0]);
  if (op == "reshape") return o::reshape(in[0], shape_from_json(n.attrs.at("shape")));
  if (op == "slice")
    return o::slice_last(in[0], n.attrs.at("begin").get<std::size_t>(),
                         n.attrs.at("end").get<std::size_t>());
  if (op == "concat") return o::concat_last(in);
  if (op == "reduce_max") return o::max_last(in[0]);
  if (op == "reduce_sum") return o::sum_last(in[0]);
  throw GraphError("op '" + op + "' cannot be executed");
}

inline void require_valid(const Graph& g) {
  const auto issues = validate(g);
  if (!issues.empty())
    throw GraphError("graph is not executable: " + issues.front() +
                     (issues.size() > 1 ? ::qmpc::detail::concat(" (+", issues.size() - 1, " more)")
                                        : std::string()));
}

}  // namespace detail

/// Secure execution on the session's three parties. Inputs and constants are
/// quantized at their node's output type and secret-shared by the client;
/// the returned statistics cover the online protocol only.
inline ExecResult execute_secure(Session& s, const Graph& g, const Feeds& feeds) {
  detail::require_valid(g);
  const auto order = topo_order(g);
  std::map<std::string, std::array<RssShare, kParties>> sources;
  for (std::size_t i : order) {
    const Node& n = g.nodes[i];
    if (n.op != "input" && n.op != "const") continue;
    const RealTensor v = detail::source_value(n, feeds);
    sources[n.id] = share(encode(v.data, v.shape, *n.output_type), *n.output_type,
                          s.client_rng());
  }
  const CommStats before = s.stats();
  auto outs = s.run([&](Party& p) {
    std::map<std::string, RssShare> val;
    for (std::size_t i : order) {
      const Node& n = g.nodes[i];
      if (n.op == "input" || n.op == "const") {
        val.emplace(n.id, sources.at(n.id)[p.id()]);
        continue;
      }
      std::vector<RssShare> in;
      for (const auto& id : n.inputs) in.push_back(val.at(id));
      val.emplace(n.id, detail::eval_secure(p, n, in));
    }
    std::vector<RssShare> res;
    for (const auto& o : g.outputs) res.push_back(val.at(o));
    return res;
  });
  ExecResult r;
  r.comm = s.stats() - before;
  for (std::size_t k = 0; k < g.outputs.size(); ++k) {
    const RingTensor v = reveal(std::array<RssShare, kParties>{outs[0][k], outs[1][k], outs[2][k]});
    const FxpType t = outs[0][k].type;
    r.names.push_back(g.outputs[k]);
    r.outputs.push_back({v.shape(), decode(v, t)});
    r.types.push_back(t);
  }
  return r;
}

/// Deterministic fixed-point evaluation of the same graph.
inline ExecResult execute_plain(const Graph& g, const Feeds& feeds) {
  detail::require_valid(g);
  std::map<std::string, oracle::Tensor> val;
  for (std::size_t i : topo_order(g)) {
    const Node& n = g.nodes[i];
    if (n.op == "input" || n.op == "const") {
      const RealTensor v = detail::source_value(n, feeds);
      val.emplace(n.id, oracle::from_real(v.data, v.shape, *n.output_type));
      continue;
    }
    std::vector<oracle::Tensor> in;
    for (const auto& id : n.inputs) in.push_back(val.at(id));
    val.emplace(n.id, detail::eval_plain(n, in));
  }
  ExecResult r;
  for (const auto& o : g.outputs) {
    const auto& t = val.at(o);
    r.names.push_back(o);
    r.outputs.push_back({t.shape, oracle::to_real(t)});
    r.types.push_back(t.type);
  }
  return r;
}

inline ExecResult execute(const Graph& g, Backend backend, const Feeds& feeds,
                          Session* session = nullptr) {
  if (backend == Backend::kPlaintext) return execute_plain(g, feeds);
  if (session) return execute_secure(*session, g, feeds);
  Session s;
  return execute_secure(s, g, feeds);
}

/// Count of non-source nodes on the longest path into each output.
inline std::vector<std::size_t> path_ops(const Graph& g) {
  std::map<std::string, std::size_t> depth;
  for (std::size_t i : topo_order(g)) {
    const Node& n = g.nodes[i];
    std::size_t d = 0;
    for (const auto& in : n.inputs) d = std::max(d, depth[in]);
    const bool source = n.op == "input" || n.op == "const";
    depth[n.id] = d + (source ? 0 : 1);
  }
  std::vector<std::size_t> out;
  for (const auto& o : g.outputs) out.push_back(depth[o]);
  return out;
}

/// Softmax over the last axis spelled out as primitive nodes:
/// reduce_max -> sub -> exp -> reduce_sum -> div.
inline Graph softmax_dag(const Shape& shape) {
  Graph g;
  Json sh = Json::array();
  for (auto d : shape) sh.push_back(d);
  g.nodes = {
      {"x", "input", {}, {{"shape", sh}}, {}, {}, {}},
      {"max", "reduce_max", {"x"}, Json::object(), {}, {}, {}},
      {"shifted", "sub", {"x", "max"}, Json::object(), {}, {}, {}},
      {"exp", "exp", {"shifted"}, Json::object(), {}, {}, {}},
      {"sum", "reduce_sum", {"exp"}, Json::object(), {}, {}, {}},
      {"div", "div", {"exp", "sum"}, Json::object(), {}, {}, {}},
  };
  g.outputs = {"div"};
  return g;
}

}  // namespace qmpc::graph
