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

namespace qmpc::graph {
namespace {

using qmpc::testing::uniform;

const FxpType kLow = FxpType::low();
const FxpType kHigh = FxpType::high();
const PrecisionMap kQuant = PrecisionMap::quantized();

Node node(std::string id, std::string op, std::vector<std::string> in = {},
          Json attrs = Json::object()) {
  Node n;
  n.id = std::move(id);
  n.op = std::move(op);
  n.inputs = std::move(in);
  n.attrs = std::move(attrs);
  return n;
}

Graph matmul_graph() {
  Graph g;
  g.nodes = {node("x", "input"), node("w", "input"), node("y", "matmul", {"x", "w"})};
  g.outputs = {"y"};
  return g;
}

std::vector<std::string> inserted_casts(const Graph& g) {
  std::vector<std::string> ids;
  for (const auto& n : g.nodes)
    if (is_cast(n)) ids.push_back(n.id);
  return ids;
}

// Rewires every reader of cast `id` to the cast's input and drops the cast.
Graph bypass(Graph g, const std::string& id) {
  const std::string src = g.at(id).inputs[0];
  std::erase_if(g.nodes, [&](const Node& n) { return n.id == id; });
  for (auto& n : g.nodes)
    for (auto& in : n.inputs)
      if (in == id) in = src;
  for (auto& o : g.outputs)
    if (o == id) o = src;
  return g;
}

TEST(InferTypes, MatmulUsesLinearType) {
  const Graph t = infer_types(matmul_graph(), kQuant);
  EXPECT_EQ(*t.at("y").compute_type, kLow);
  EXPECT_EQ(*t.at("y").output_type, kLow);
  const Graph u = infer_types(matmul_graph(), PrecisionMap::uniform64());
  EXPECT_EQ(*u.at("y").compute_type, kHigh);
}

TEST(InferTypes, SoftmaxComputesHighWithLowEdges) {
  Graph g;
  g.nodes = {node("x", "input"), node("s", "softmax", {"x"})};
  g.outputs = {"s"};
  const Graph t = infer_types(g, kQuant);
  EXPECT_EQ(*t.at("s").compute_type, kHigh);
  EXPECT_EQ(*t.at("s").input_type, kLow);
  EXPECT_EQ(*t.at("s").output_type, kLow);
  EXPECT_TRUE(is_valid(insert_casts(t)));
  EXPECT_TRUE(inserted_casts(insert_casts(t)).empty());
}

TEST(InferTypes, HeadCategoryAndExplicitInputType) {
  Graph g;
  g.nodes = {node("x", "input", {}, {{"type", "fxp<64,18>"}}),
             node("w", "const", {}, {{"value", {1.0}}}),
             node("y", "matmul", {"x", "w"}, {{"precision", "head"}})};
  g.outputs = {"y"};
  const Graph c = compile(g, kQuant);
  EXPECT_EQ(*c.at("y").compute_type, kHigh);
  EXPECT_EQ(*c.at("w").output_type, kHigh);
  EXPECT_TRUE(inserted_casts(c).empty());  // head outputs leave at their own type
  EXPECT_TRUE(is_valid(c));
}

TEST(InferTypes, ConstantsTakeTheirConsumersType) {
  Graph g;
  g.nodes = {node("x", "input"), node("g", "const", {}, {{"value", {1.0, 1.0}}}),
             node("b", "const", {}, {{"value", {0.0, 0.0}}}),
             node("w", "const", {}, {{"value", {1.0, 0.0, 0.0, 1.0}}, {"shape", {2, 2}}}),
             node("h", "matmul", {"x", "w"}), node("y", "layernorm", {"h", "g", "b"})};
  g.outputs = {"y"};
  const Graph c = compile(g, kQuant);
  EXPECT_EQ(*c.at("w").output_type, kLow);
  EXPECT_EQ(*c.at("g").output_type, kHigh);
  EXPECT_EQ(*c.at("b").output_type, kHigh);
  EXPECT_TRUE(inserted_casts(c).empty());
  EXPECT_TRUE(is_valid(c));
}

TEST(InferTypes, RejectsCyclesUnknownOpsAndDanglingInputs) {
  Graph cyc;
  cyc.nodes = {node("a", "add", {"b", "b"}), node("b", "exp", {"a"})};
  EXPECT_THROW(infer_types(cyc, kQuant), GraphError);

  Graph unknown;
  unknown.nodes = {node("x", "input"), node("y", "tanh", {"x"})};
  EXPECT_THROW(infer_types(unknown, kQuant), GraphError);

  Graph dangling;
  dangling.nodes = {node("y", "exp", {"nope"})};
  EXPECT_THROW(infer_types(dangling, kQuant), GraphError);

  Graph dup;
  dup.nodes = {node("x", "input"), node("x", "input")};
  EXPECT_THROW(topo_order(dup), GraphError);

  Graph arity;
  arity.nodes = {node("x", "input"), node("y", "matmul", {"x"})};
  EXPECT_THROW(topo_order(arity), GraphError);

  Graph missing_out;
  missing_out.nodes = {node("x", "input")};
  missing_out.outputs = {"z"};
  EXPECT_THROW(topo_order(missing_out), GraphError);
}

TEST(InsertCasts, LowProducerFeedingHighConsumerGetsOneUpcast) {
  Graph g;
  g.nodes = {node("x", "input"), node("e", "exp", {"x"}), node("f", "exp", {"x"})};
  g.outputs = {"e", "f"};
  const Graph c = compile(g, kQuant);
  // Both readers share a single upcast; each output gets its own downcast.
  EXPECT_EQ(c.count("upcast"), 1u);
  EXPECT_EQ(c.count("downcast"), 2u);
  EXPECT_EQ(c.at("e").inputs[0], c.at("f").inputs[0]);
  EXPECT_TRUE(is_valid(c));
}

TEST(InsertCasts, SoftmaxDagGainsOneUpcastBeforeExpAndOneDowncastAfterDiv) {
  const Graph c = compile(load_graph(QMPC_SAMPLES_DIR "/softmax_dag.json"), kQuant);
  ASSERT_EQ(inserted_casts(c).size(), 2u);
  EXPECT_EQ(c.count("upcast"), 1u);
  EXPECT_EQ(c.count("downcast"), 1u);
  const Node& up = c.at(c.at("exp").inputs[0]);
  EXPECT_EQ(up.op, "upcast");
  EXPECT_EQ(up.inputs[0], "shifted");
  ASSERT_EQ(c.outputs.size(), 1u);
  const Node& down = c.at(c.outputs[0]);
  EXPECT_EQ(down.op, "downcast");
  EXPECT_EQ(down.inputs[0], "div");
  EXPECT_EQ(*c.at("max").compute_type, kLow);
  EXPECT_EQ(*c.at("sum").compute_type, kHigh);
  EXPECT_TRUE(validate(c).empty());
}

TEST(InsertCasts, Idempotent) {
  const Graph once = compile(softmax_dag({8, 10}), kQuant);
  const Graph twice = insert_casts(once);
  EXPECT_EQ(dump(once), dump(twice));
  const Graph retyped = compile(once, kQuant);
  EXPECT_EQ(dump(once), dump(retyped));
  const Graph plain = infer_types(matmul_graph(), kQuant);
  EXPECT_EQ(dump(insert_casts(plain)), dump(plain));
}

TEST(InsertCasts, EveryInsertedCastIsNeeded) {
  for (const Graph& src : {softmax_dag({8, 10}), [] {
         Graph g;
         g.nodes = {node("x", "input"), node("h", "gelu_poly", {"x"}),
                    node("y", "add", {"h", "x"})};
         g.outputs = {"y"};
         return g;
       }()}) {
    const Graph c = compile(src, kQuant);
    const auto casts = inserted_casts(c);
    ASSERT_FALSE(casts.empty());
    for (const auto& id : casts) EXPECT_FALSE(is_valid(bypass(c, id))) << id;
  }
}

TEST(InsertCasts, UniformMapNeedsNoCasts) {
  const Graph c = compile(softmax_dag({8, 10}), PrecisionMap::uniform64());
  EXPECT_TRUE(inserted_casts(c).empty());
  EXPECT_TRUE(is_valid(c));
}

TEST(InsertCasts, FloorRoundingOption) {
  const Graph c = compile(softmax_dag({8, 10}), kQuant, {Rounding::kFloor});
  EXPECT_EQ(c.at(c.outputs[0]).attrs["rounding"], "floor");
}

TEST(Validate, ReportsUntypedAndMismatchedEdges) {
  EXPECT_FALSE(is_valid(matmul_graph()));
  Graph t = infer_types(softmax_dag({2, 3}), kQuant);
  const auto issues = validate(t);
  EXPECT_EQ(issues.size(), 2u);  // sub -> exp edge and the div output
}

TEST(Dump, RoundTripsThroughTextAndJson) {
  const Graph c = compile(softmax_dag({8, 10}), kQuant);
  const std::string text = dump(c);
  EXPECT_NE(text.find("upcast(shifted)"), std::string::npos);
  EXPECT_NE(text.find("[fxp<64,18> -> fxp<64,18> -> fxp<32,8>]"), std::string::npos);
  const Graph back = parse_dump(text);
  EXPECT_EQ(dump(back), text);
  EXPECT_TRUE(is_valid(back));
  const Graph j = from_json(to_json(c));
  EXPECT_EQ(dump(j), text);
  EXPECT_EQ(to_json(j), to_json(c));
  EXPECT_THROW(parse_dump("this is not a graph"), GraphError);
}

TEST(Dump, DeterministicOrderIndependentOfFileOrder) {
  Graph g = softmax_dag({2, 2});
  std::reverse(g.nodes.begin(), g.nodes.end());
  const std::string a = dump(compile(g, kQuant));
  const std::string b = dump(compile(g, kQuant));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rfind("x = input", 0), 0u);
}

TEST(Execute, EmptyGraph) {
  const Graph g = compile(Graph{}, kQuant);
  const auto s = execute(g, Backend::kSecure, {});
  const auto p = execute(g, Backend::kPlaintext, {});
  EXPECT_TRUE(s.outputs.empty());
  EXPECT_TRUE(p.outputs.empty());
  EXPECT_EQ(s.comm.total_bytes(), 0u);
}

TEST(Execute, SingleMatmulMatchesPlaintextWithinTruncSlack) {
  const Graph g = compile(matmul_graph(), kQuant);
  const Feeds feeds = {{"x", {{4, 6}, uniform(24, -2, 2)}},
                       {"w", {{6, 3}, uniform(18, -1, 1)}}};
  Session s;
  const auto sec = execute(g, Backend::kSecure, feeds, &s);
  const auto pl = execute(g, Backend::kPlaintext, feeds);
  ASSERT_EQ(sec.outputs[0].shape, (Shape{4, 3}));
  EXPECT_LE(oracle::max_ulp(sec.outputs[0].data, pl.outputs[0].data, kLow),
            oracle::slack("matmul"));
  EXPECT_EQ(sec.comm.rounds, 3u);  // reshare + two-round truncation
  EXPECT_EQ(sec.types[0], kLow);
}

TEST(Execute, MissingFeedIsAnError) {
  const Graph g = compile(matmul_graph(), kQuant);
  EXPECT_THROW(execute(g, Backend::kPlaintext, {{"x", {{1, 1}, {1.0}}}}), GraphError);
  EXPECT_THROW(execute(matmul_graph(), Backend::kPlaintext, {}), GraphError);
}

TEST(Execute, SoftmaxDagRowSumsAndBackendEquivalence) {
  const Graph g = compile(load_graph(QMPC_SAMPLES_DIR "/softmax_dag.json"), kQuant);
  const std::size_t n = 10;
  const Feeds feeds = {{"x", {{8, n}, uniform(8 * n, -4, 4)}}};
  const auto sec = execute(g, Backend::kSecure, feeds);
  const auto pl = execute(g, Backend::kPlaintext, feeds);
  const auto& y = sec.outputs[0].data;
  std::size_t tight = 0;
  for (std::size_t r = 0; r < 8; ++r) {
    double sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_GE(y[r * n + j], 0.0);
      sum += y[r * n + j];
    }
    EXPECT_NEAR(sum, 1.0, static_cast<double>(n + 1) * kLow.ulp());
    if (std::abs(sum - 1.0) <= std::ldexp(1.0, -7)) ++tight;
  }
  RecordProperty("rows_within_2^-7", std::to_string(tight));
  const double bound = 2.0 * static_cast<double>(path_ops(g)[0]);
  EXPECT_LE(oracle::max_ulp(y, pl.outputs[0].data, kLow), bound);
  EXPECT_GT(sec.comm.bytes_in_phase("upcast"), 0u);
  EXPECT_GT(sec.comm.bytes_in_phase("exp"), 0u);
}

TEST(Execute, DecomposedAndFusedSoftmaxAgree) {
  Graph fused;
  fused.nodes = {node("x", "input"), node("s", "softmax", {"x"})};
  fused.outputs = {"s"};
  const Feeds feeds = {{"x", {{8, 10}, uniform(80, -4, 4)}}};
  const auto a = execute(compile(fused, kQuant), Backend::kPlaintext, feeds);
  const auto b = execute(compile(softmax_dag({8, 10}), kQuant), Backend::kPlaintext, feeds);
  EXPECT_EQ(a.outputs[0].data, b.outputs[0].data);
}

TEST(Execute, MixedGraphBackendEquivalence) {
  // Exercises every executable op kind at least once.
  Graph g;
  g.nodes = {node("x", "input", {}, {{"shape", {4, 6}}}),
             node("w", "const", {}, {{"weight", "w"}}),
             node("m", "const", {}, {{"value", 0.5}}),
             node("g", "const", {}, {{"value", {1, 1, 1, 1, 1, 1}}}),
             node("b", "const", {}, {{"value", {0, 0, 0, 0, 0, 0}}}),
             node("h", "matmul", {"x", "w"}),
             node("hs", "scale", {"h"}, {{"factor", 0.5}}),
             node("hm", "mul", {"hs", "m"}),
             node("q", "gelu_quad", {"hm"}),
             node("p", "gelu_poly", {"hm"}),
             node("qt", "transpose", {"q"}),
             node("qb", "transpose", {"qt"}),
             node("c", "concat", {"qb", "p"}),
             node("cs", "slice", {"c"}, {{"begin", 2}, {"end", 8}}),
             node("r", "reshape", {"cs"}, {{"shape", {4, 6}}}),
             node("sm", "softmax", {"r"}),
             node("ad", "add", {"sm", "x"}),
             node("ln", "layernorm", {"ad", "g", "b"}),
             node("rs", "reduce_sum", {"ln"}),
             node("rm", "reduce_max", {"ln"}),
             node("d", "sub", {"rm", "rs"})};
  g.outputs = {"ln", "d", "p"};
  const Graph c = compile(g, kQuant);
  ASSERT_TRUE(is_valid(c)) << validate(c).front();
  const Feeds feeds = {{"x", {{4, 6}, uniform(24, -2, 2)}},
                       {"w", {{6, 6}, uniform(36, -0.5, 0.5)}}};
  const auto sec = execute(c, Backend::kSecure, feeds);
  const auto pl = execute(c, Backend::kPlaintext, feeds);
  const auto depth = path_ops(c);
  for (std::size_t k = 0; k < sec.outputs.size(); ++k) {
    const double err = oracle::max_ulp(sec.outputs[k].data, pl.outputs[k].data, sec.types[k]);
    EXPECT_LE(err, 2.0 * static_cast<double>(depth[k])) << sec.names[k];
  }
}

}  // namespace
}  // namespace qmpc::graph
