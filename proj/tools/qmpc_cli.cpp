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

// qmpc_cli: benchmarks, single-op runs, graph dumps and the self-test.
// Reports are printed as one JSON object per line.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "qmpc/checks.hpp"

namespace {

using namespace qmpc;

struct Common {
  std::uint64_t seed = 1;
  std::string csv;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "RNG seed (DITTO_SEED overrides)");
  app->add_option("--csv", c.csv, "Also write the report as flat key,value CSV");
}

int emit(const bench::Report& r, const Common& c) {
  std::cout << r.to_json().dump() << std::endl;
  if (!c.csv.empty()) {
    std::ofstream out(c.csv);
    if (!out) throw ConfigError("cannot write '" + c.csv + "'");
    out << r.to_csv();
  }
  for (const auto& ch : r.checks)
    if (!ch.pass) std::cerr << "check failed: " << ch.name << " = " << ch.value << "\n";
  return r.ok() ? 0 : 1;
}

Shape parse_shape(const std::string& s) {
  Shape out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto end = s.find('x', pos);
    const std::string part = s.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    try {
      std::size_t used = 0;
      const auto v = std::stoull(part, &used);
      if (used != part.size() || v == 0) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("bad shape '" + s + "', expected e.g. 8x10");
    }
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return out;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
}

graph::PrecisionMap load_map(const std::string& spec) {
  if (spec == "quantized" || spec == "uniform64") return bench::precision_map(spec);
  return graph::PrecisionMap::from_json(read_json(spec));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qmpc: three-party replicated-sharing inference toolkit"};
  app.require_subcommand(1);

  Common common;

  bench::MatmulParams mm;
  auto* bm = app.add_subcommand("bench-matmul", "Secure matmul with per-phase communication");
  bm->add_option("--m", mm.m, "Rows of X")->capture_default_str();
  bm->add_option("--k", mm.k, "Inner dimension")->capture_default_str();
  bm->add_option("--n", mm.n, "Columns of W")->capture_default_str();
  bm->add_option("--bits", mm.bits, "Ring width")->check(CLI::IsMember({32, 64}))->capture_default_str();
  bm->add_option("--net", mm.net, "Network model")->check(CLI::IsMember({"lan", "wan"}))->capture_default_str();
  add_common(bm, common);

  bench::BlockParams bp;
  std::string config_path, gelu;
  auto* bb = app.add_subcommand("bench-block", "Toy transformer block, quantized vs uniform64");
  bb->add_option("--config", config_path, "Block config JSON (defaults built in)");
  bb->add_option("--gelu", gelu, "Override the config's GeLU")->check(CLI::IsMember({"quad", "poly"}));
  bb->add_option("--mode", bp.mode, "Precision map reported as primary")
      ->check(CLI::IsMember({"quantized", "uniform64"}))
      ->capture_default_str();
  bb->add_option("--weights", bp.weights, "Weight manifest (random weights when absent)");
  bb->add_option("--input-range", bp.input_range, "Inputs are uniform in [-r, r]")->capture_default_str();
  add_common(bb, common);

  bench::OpParams op;
  std::string input_path, shape = "8x10";
  auto* ro = app.add_subcommand("run-op", "Run one op securely and compare with the oracle");
  ro->add_option("--op", op.op, "Op name, e.g. softmax")->required();
  ro->add_option("--input", input_path, "Input JSON (random inputs when absent)");
  ro->add_option("--shape", shape, "Shape of random inputs")->capture_default_str();
  ro->add_option("--precision", op.precision, "quantized, uniform64 or a map file")->capture_default_str();
  add_common(ro, common);

  std::string graph_path, map_spec = "quantized";
  bool no_casts = false, as_json = false;
  auto* dg = app.add_subcommand("dump-graph", "Type a graph, insert casts and print it");
  dg->add_option("--graph", graph_path, "Graph JSON")->required();
  dg->add_option("--precision", map_spec, "quantized, uniform64 or a map file")->capture_default_str();
  dg->add_flag("--no-casts", no_casts, "Only infer types");
  dg->add_flag("--json", as_json, "Print JSON instead of the text dump");

  std::string samples = QMPC_SAMPLES_DIR;
  auto* st = app.add_subcommand("selftest", "Run the invariant suite");
  st->add_option("--samples", samples, "Samples directory")->capture_default_str();
  add_common(st, common);

  std::string weights_out;
  auto* mw = app.add_subcommand("make-weights", "Write random block weights");
  mw->add_option("--config", config_path, "Block config JSON");
  mw->add_option("--out", weights_out, "Manifest path; the blob is written next to it")->required();
  mw->add_option("--seed", common.seed, "RNG seed (DITTO_SEED overrides)");

  CLI11_PARSE(app, argc, argv);

  try {
    common.seed = bench::resolve_seed(common.seed);
    if (*bm) {
      mm.seed = common.seed;
      return emit(bench::bench_matmul(mm), common);
    }
    if (*bb) {
      if (!config_path.empty()) bp.config = model::BlockConfig::load(config_path);
      if (!gelu.empty()) bp.config.gelu = model::BlockConfig::parse_gelu(gelu);
      bp.seed = common.seed;
      return emit(bench::bench_block(bp), common);
    }
    if (*ro) {
      op.seed = common.seed;
      op.shape = parse_shape(shape);
      if (!input_path.empty()) op.input = read_json(input_path);
      return emit(bench::run_op(op), common);
    }
    if (*dg) {
      const graph::Graph g = graph::load_graph(graph_path);
      const graph::PrecisionMap map = load_map(map_spec);
      const graph::Graph out = no_casts ? graph::infer_types(g, map) : graph::compile(g, map);
      std::cout << (as_json ? graph::to_json(out).dump(2) + "\n" : graph::dump(out));
      const auto issues = graph::validate(out);
      for (const auto& i : issues) std::cerr << "invalid: " << i << "\n";
      return no_casts || issues.empty() ? 0 : 1;
    }
    if (*st) {
      bench::Report r;
      r.cmd = "selftest";
      r.params = {{"seed", common.seed}};
      r.checks = checks::selftest(common.seed, samples);
      std::size_t passed = 0;
      for (const auto& c : r.checks) passed += c.pass;
      r.results = {{"passed", passed}, {"total", r.checks.size()}};
      for (const auto& c : r.checks)
        std::cerr << (c.pass ? "PASS  " : "FAIL  ") << c.name << ": " << c.detail << "\n";
      return emit(r, common);
    }
    if (*mw) {
      model::BlockConfig c;
      if (!config_path.empty()) c = model::BlockConfig::load(config_path);
      std::string blob = std::filesystem::path(weights_out).stem().string() + ".bin";
      model::save_weights(model::random_weights(c, common.seed), weights_out, blob);
      std::cout << nlohmann::json{{"cmd", "make-weights"},
                                  {"params", {{"config", c.to_json()}, {"seed", common.seed}}},
                                  {"manifest", weights_out},
                                  {"blob", blob}}
                       .dump()
                << std::endl;
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
