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

#include <cstdlib>

#include "qmpc/checks.hpp"

namespace qmpc {
namespace {

TEST(Report, JsonHasEveryField) {
  bench::MatmulParams p{.m = 2, .k = 3, .n = 4, .bits = 32, .net = "lan", .seed = 1};
  const auto j = bench::bench_matmul(p).to_json();
  for (const char* k : {"cmd", "params", "comm", "phases", "est_time", "checks", "results"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["cmd"], "bench-matmul");
  EXPECT_TRUE(j["comm"].contains("0->1"));
  EXPECT_TRUE(j["comm"].contains("rounds"));
  EXPECT_EQ(j["phases"][0]["name"], "dot_product");
  // One JSON line.
  EXPECT_EQ(j.dump().find('\n'), std::string::npos);
}

TEST(Report, CsvMirrorsJson) {
  bench::Report r;
  r.cmd = "x";
  r.params = {{"note", "a,b"}};
  r.check("ok", true, 1.5);
  const std::string csv = r.to_csv();
  EXPECT_EQ(csv.rfind("key,value\n", 0), 0u);
  EXPECT_NE(csv.find("/cmd,x\n"), std::string::npos);
  EXPECT_NE(csv.find("/params/note,\"a,b\"\n"), std::string::npos);
  EXPECT_NE(csv.find("/checks/0/value,1.5\n"), std::string::npos);
  EXPECT_TRUE(r.ok());
  r.check("bad", false, 0);
  EXPECT_FALSE(r.ok());
}

TEST(Seed, EnvironmentOverrides) {
  ::unsetenv("DITTO_SEED");
  EXPECT_EQ(bench::resolve_seed(7), 7u);
  ::setenv("DITTO_SEED", "0x10", 1);
  EXPECT_EQ(bench::resolve_seed(7), 16u);
  ::setenv("DITTO_SEED", "seven", 1);
  EXPECT_THROW(bench::resolve_seed(7), ConfigError);
  ::unsetenv("DITTO_SEED");
}

// One output: 3 reshare messages for the product and 6 words of truncation.
TEST(BenchMatmul, SingleElementMessageCount) {
  bench::MatmulParams p{.m = 1, .k = 1, .n = 1, .bits = 64, .net = "lan", .seed = 3};
  const auto r = bench::bench_matmul(p);
  EXPECT_EQ(r.comm.bytes_in_phase("mul"), 3u * 8);
  EXPECT_EQ(r.comm.bytes_in_phase("trunc"), 6u * 8);
  EXPECT_EQ(r.comm.total_bytes(), 9u * 8);
  EXPECT_TRUE(r.ok());
}

TEST(BenchMatmul, HalfWidthHalvesDotProduct) {
  bench::MatmulParams p{.m = 8, .k = 96, .n = 48, .bits = 32, .net = "lan", .seed = 3};
  const auto a = bench::bench_matmul(p);
  p.bits = 64;
  const auto b = bench::bench_matmul(p);
  EXPECT_EQ(2 * a.comm.bytes_in_phase("mul"), b.comm.bytes_in_phase("mul"));
  EXPECT_EQ(a.comm.rounds, b.comm.rounds);
}

TEST(BenchMatmul, WanSlowerThanLan) {
  bench::MatmulParams p{.m = 4, .k = 8, .n = 4, .bits = 32, .net = "wan", .seed = 3};
  const auto j = bench::bench_matmul(p).to_json();
  EXPECT_GT(j["est_time"]["wan"].get<double>(), j["est_time"]["lan"].get<double>());
  EXPECT_EQ(j["results"]["time_s"], j["est_time"]["wan"]);
}

TEST(BenchMatmul, RejectsBadArguments) {
  bench::MatmulParams p;
  p.bits = 16;
  EXPECT_THROW(bench::bench_matmul(p), ConfigError);
  p.bits = 32;
  p.net = "lte";
  EXPECT_THROW(bench::bench_matmul(p), ConfigError);
}

bench::BlockParams small_block(model::GeluMode gelu, std::uint64_t seed) {
  bench::BlockParams p;
  p.config = {.d_model = 16, .n_heads = 2, .d_ff = 32, .seq_len = 4, .gelu = gelu};
  p.seed = seed;
  return p;
}

TEST(BenchBlock, DeterministicForFixedSeed) {
  const auto a = bench::bench_block(small_block(model::GeluMode::kQuad, 9)).to_json();
  const auto b = bench::bench_block(small_block(model::GeluMode::kQuad, 9)).to_json();
  EXPECT_EQ(a["comm"], b["comm"]);
  EXPECT_EQ(a["results"]["max_abs_vs_oracle"], b["results"]["max_abs_vs_oracle"]);
  EXPECT_EQ(a["results"]["ratio"], b["results"]["ratio"]);
}

TEST(BenchBlock, PolyCostsMoreThanQuad) {
  const auto q = bench::bench_block(small_block(model::GeluMode::kQuad, 2));
  const auto p = bench::bench_block(small_block(model::GeluMode::kPoly, 2));
  EXPECT_GT(p.comm.total_bytes(), q.comm.total_bytes());
}

TEST(BenchBlock, ReportsBothModes) {
  auto prm = small_block(model::GeluMode::kQuad, 4);
  prm.mode = "uniform64";
  const auto r = bench::bench_block(prm);
  const auto& m = r.results["modes"];
  EXPECT_EQ(m["uniform64"]["bytes"].get<std::uint64_t>(), r.comm.total_bytes());
  EXPECT_DOUBLE_EQ(r.results["ratio"].get<double>(),
                   m["quantized"]["bytes"].get<double>() / m["uniform64"]["bytes"].get<double>());
  prm.mode = "fp16";
  EXPECT_THROW(bench::bench_block(prm), ConfigError);
}

TEST(RunOp, SoftmaxReportsOracleDistance) {
  bench::OpParams p;
  p.op = "softmax";
  const auto r = bench::run_op(p);
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.results.contains("max_abs_vs_oracle"));
  EXPECT_TRUE(r.results.contains("max_abs_vs_float"));
  EXPECT_EQ(r.results["output_type"], "fxp<32,8>");
}

TEST(RunOp, EveryComputingOpRunsOnRandomInput) {
  for (const auto& [name, info] : graph::op_table()) {
    if (info.rule == graph::Rule::kSource || info.rule == graph::Rule::kConst ||
        info.rule == graph::Rule::kCast || name == "slice" || name == "reshape" ||
        name == "scale")
      continue;
    bench::OpParams p;
    p.op = name;
    p.shape = {4, 6};
    const auto r = bench::run_op(p);
    EXPECT_TRUE(r.ok()) << name << " " << r.to_json().dump();
  }
}

TEST(RunOp, ExplicitInputAndAttrs) {
  bench::OpParams p;
  p.op = "scale";
  p.input = {{"inputs", {{{"shape", {2}}, {"data", {1.0, -2.0}}}}}, {"attrs", {{"factor", 0.5}}}};
  const auto r = bench::run_op(p);
  EXPECT_TRUE(r.ok());
  EXPECT_LE(r.results["max_abs_vs_oracle"].get<double>(), FxpType::low().ulp());
  p.op = "input";
  EXPECT_THROW(bench::run_op(p), ConfigError);
  p.op = "scale";
  p.input = {{"inputs", 3}};
  EXPECT_THROW(bench::run_op(p), ConfigError);
}

TEST(Checks, QuickSelftestPasses) {
  for (const auto& c : checks::selftest(11, QMPC_SAMPLES_DIR))
    EXPECT_TRUE(c.pass) << c.name << ": " << c.detail;
}

}  // namespace
}  // namespace qmpc
