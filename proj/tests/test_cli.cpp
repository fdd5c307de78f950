/*
 * Copyright 2026 The sparsekl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sparsekl/cli.hpp"
#include "sparsekl/io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <random>
#include <sstream>
#include <string>

using namespace sparsekl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("sparsekl_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

struct Outcome {
  int code;
  std::string log;
  std::string err;
};

Outcome run_with(const fs::path &dir, std::string_view task, const std::string &config,
                 std::optional<std::uint64_t> seed = std::nullopt, std::optional<fs::path> out = std::nullopt) {
  const fs::path cfg = dir / (std::string(task) + ".json");
  write_text(cfg, config);
  std::ostringstream log, err;
  const int code = run_command(task, cfg, seed, out, log, err);
  return {code, log.str(), err.str()};
}

bool trace_monotone(const fs::path &path) {
  const Table t = read_csv(path);
  const Index c = t.column("objective");
  for (Index i = 1; i < t.values.rows(); ++i) {
    if (t.values(i, c) < t.values(i - 1, c)) return false;
  }
  return t.values.rows() > 0;
}

bool under(const fs::path &root, const fs::path &p) {
  const auto r = fs::weakly_canonical(root).string(), q = fs::weakly_canonical(p).string();
  return q.compare(0, r.size(), r) == 0;
}

} // namespace

TEST_CASE("config validation") {
  TempDir tmp;
  SUBCASE("unknown keys are listed") {
    const Outcome o = run_with(tmp.path, "verify", R"({"seed": 0, "tolerence": 1e-8, "verify": {"count": 3}})");
    CHECK(o.code == kExitConfig);
    CHECK(o.err.find("tolerence") != std::string::npos);
  }
  SUBCASE("nested unknown keys") {
    const Outcome o = run_with(tmp.path, "verify", R"({"seed": 0, "verify": {"count": 3, "limit": 1}})");
    CHECK(o.code == kExitConfig);
    CHECK(o.err.find("count, limit") != std::string::npos);
  }
  SUBCASE("stochastic tasks need a seed") {
    CHECK(run_with(tmp.path, "generate", R"({})").code == kExitConfig);
    CHECK(run_with(tmp.path, "generate", R"({})", 4).code == kExitOk);
  }
  SUBCASE("missing data file") {
    const Outcome o = run_with(tmp.path, "fit-regression", R"({"data": "nowhere.csv"})");
    CHECK(o.code == kExitConfig);
    CHECK(o.err.find("nowhere.csv") != std::string::npos);
  }
  SUBCASE("wrong types, bad values and mismatched task") {
    CHECK(run_with(tmp.path, "verify", R"({"seed": "zero"})").code == kExitConfig);
    CHECK(run_with(tmp.path, "verify", R"({"seed": 0, "verify": {"tolerance": -1}})").code == kExitConfig);
    CHECK(run_with(tmp.path, "verify", R"({"seed": 0, "task": "generate"})").code == kExitConfig);
    CHECK(run_with(tmp.path, "verify", R"({"seed": 0,)").code == kExitConfig);
    CHECK(run_with(tmp.path, "train", R"({"seed": 0})").code == kExitConfig);
    CHECK(run_with(tmp.path, "fit-cox", R"({"data": "verify.json"})").code == kExitConfig);
  }
  SUBCASE("missing config file") {
    std::ostringstream log, err;
    CHECK(run_command("verify", tmp.path / "absent.json", 0, std::nullopt, log, err) == kExitConfig);
  }
}

TEST_CASE("relative paths resolve against the config directory") {
  TempDir tmp;
  fs::create_directories(tmp.path / "cfg");
  const fs::path cfg = tmp.path / "cfg" / "gen.json";
  write_text(cfg, R"({"seed": 1, "output": "../artifacts", "generate": {"n": 20}})");
  const RunConfig rc = parse_config(read_text(cfg), Task::Generate, cfg.parent_path());
  CHECK(rc.output == (tmp.path / "artifacts").lexically_normal());
  std::ostringstream log, err;
  CHECK(run_command("generate", cfg, std::nullopt, std::nullopt, log, err) == kExitOk);
  CHECK(fs::exists(tmp.path / "artifacts" / "data.csv"));
}

TEST_CASE("generate is deterministic under a seed") {
  TempDir tmp;
  for (const char *kind : {"regression", "classification", "cox"}) {
    const std::string cfg = std::string(R"({"seed": 11, "generate": {"kind": ")") + kind + "\"}}";
    REQUIRE(run_with(tmp.path, "generate", cfg, std::nullopt, tmp.path / "a").code == kExitOk);
    REQUIRE(run_with(tmp.path, "generate", cfg, std::nullopt, tmp.path / "b").code == kExitOk);
    CHECK(read_text(tmp.path / "a" / "data.csv") == read_text(tmp.path / "b" / "data.csv"));
    REQUIRE(run_with(tmp.path, "generate", cfg, 12, tmp.path / "c").code == kExitOk);
    CHECK(read_text(tmp.path / "a" / "data.csv") != read_text(tmp.path / "c" / "data.csv"));
  }
  CHECK(read_csv(tmp.path / "a" / "data.csv").header == std::vector<std::string>{"x0"});
}

TEST_CASE("verify writes a passing report") {
  TempDir tmp;
  const Outcome o = run_with(tmp.path, "verify", R"({"seed": 0, "output": "v"})");
  CHECK(o.code == kExitOk);
  const json rep = json::parse(read_text(tmp.path / "v" / "verify_report.json"));
  CHECK(rep["passed"].get<bool>());
  CHECK(rep["instances"].size() == 150);
  for (const char *fam : {"equivalence", "chain_rule", "augmentation_gap", "pushforward"}) {
    CHECK(rep["families"][fam]["max_diff"].get<double>() <= 1e-8);
    CHECK(rep["families"][fam]["passed"].get<bool>());
  }
  CHECK(rep["families"]["augmentation_gap"]["min_mismatched_gap"].get<double>() > 0.01);
  for (const char *field : {"instance_seed", "full_kl", "titsias_kl", "elbo_gap", "chain_conditional",
                            "chain_marginal", "aug_gap", "push_diff"}) {
    CHECK(rep["instances"][0].contains(field));
  }
  // Tolerances beyond double precision cannot pass.
  CHECK(run_with(tmp.path, "verify", R"({"seed": 0, "output": "w", "verify": {"tolerance": 1e-300}})").code ==
        kExitVerification);
}

TEST_CASE("fit-regression end to end") {
  TempDir tmp;
  REQUIRE(run_with(tmp.path, "generate", R"({"seed": 0, "output": "data", "generate": {"n": 100}})").code == kExitOk);
  const std::string cfg = R"({"data": "data/data.csv", "output": "fit", "model": {"num_inducing": 10}})";
  const Outcome o = run_with(tmp.path, "fit-regression", cfg);
  REQUIRE(o.code == kExitOk);
  const fs::path out = tmp.path / "fit";
  const Table pred = read_csv(out / "predictions.csv");
  CHECK(pred.values.rows() == 100);
  CHECK(pred.header == std::vector<std::string>{"x0", "mean", "variance"});
  CHECK(trace_monotone(out / "trace.csv"));
  CHECK(trace_monotone(out / "trace_hyperparameters.csv"));
  json summary = json::parse(read_text(out / "summary.json"));
  CHECK(std::abs(summary["collapsed_gap"].get<double>()) <= 1e-3);
  CHECK(summary["num_inducing"].get<int>() == 10);
  const SVGPState s = state_from_json(read_text(out / "checkpoint.json"));
  CHECK(s.num_inducing() == 10);
  for (const auto &entry : fs::recursive_directory_iterator(out)) CHECK(under(out, entry.path()));

  // A rerun reproduces everything except the wall clock.
  REQUIRE(run_with(tmp.path, "fit-regression", cfg, std::nullopt, tmp.path / "fit2").code == kExitOk);
  json again = json::parse(read_text(tmp.path / "fit2" / "summary.json"));
  summary.erase("wall_time_s");
  again.erase("wall_time_s");
  CHECK(summary == again);
  CHECK(read_text(out / "checkpoint.json") == read_text(tmp.path / "fit2" / "checkpoint.json"));
  CHECK(read_text(out / "trace.csv") == read_text(tmp.path / "fit2" / "trace.csv"));
}

TEST_CASE("fit-classification and fit-cox end to end") {
  TempDir tmp;
  REQUIRE(run_with(tmp.path, "generate", R"({"seed": 3, "output": "c", "generate": {"kind": "classification", "n": 60}})").code == kExitOk);
  REQUIRE(run_with(tmp.path, "fit-classification", R"({"data": "c/data.csv", "output": "fc", "model": {"num_inducing": 6}})").code == kExitOk);
  const Table pc = read_csv(tmp.path / "fc" / "predictions.csv");
  CHECK(pc.values.rows() == 60);
  CHECK(pc.has_column("prob"));
  CHECK(trace_monotone(tmp.path / "fc" / "trace.csv"));

  const std::string domain = R"("domain": {"lower": [0], "upper": [12.566370614359172]})";
  REQUIRE(run_with(tmp.path, "generate", R"({"seed": 7, "output": "x", "generate": {"kind": "cox"}, "model": {)" + domain + "}}").code == kExitOk);
  REQUIRE(run_with(tmp.path, "fit-cox", R"({"data": "x/data.csv", "output": "fx", "model": {"num_inducing": 8, )" + domain + "}}").code == kExitOk);
  const Table px = read_csv(tmp.path / "fx" / "predictions.csv");
  CHECK(px.header == std::vector<std::string>{"x0", "mean", "variance", "intensity"});
  CHECK(trace_monotone(tmp.path / "fx" / "trace.csv"));
  const json summary = json::parse(read_text(tmp.path / "fx" / "summary.json"));
  const double events = summary["num_events"].get<double>();
  CHECK(std::abs(summary["integrated_intensity"].get<double>() - events) <= 0.25 * events);
}

TEST_CASE("data errors map to exit code 3") {
  TempDir tmp;
  write_text(tmp.path / "short.csv", "x0,y\n1,2\n3\n");
  Outcome o = run_with(tmp.path, "fit-regression", R"({"data": "short.csv"})");
  CHECK(o.code == kExitData);
  CHECK(o.err.find("short.csv:3") != std::string::npos);
  write_text(tmp.path / "nan.csv", "x0,y\n1,2\n3,nan\n");
  CHECK(run_with(tmp.path, "fit-regression", R"({"data": "nan.csv"})").code == kExitData);
  write_text(tmp.path / "noy.csv", "x0,x1\n1,2\n");
  CHECK(run_with(tmp.path, "fit-regression", R"({"data": "noy.csv"})").code == kExitData);
  write_text(tmp.path / "ev.csv", "x0\n1\n20\n");
  o = run_with(tmp.path, "fit-cox", R"({"data": "ev.csv", "model": {"domain": {"lower": [0], "upper": [10]}}})");
  CHECK(o.code == kExitData);
  CHECK(o.err.find("outside") != std::string::npos);
}
