// Copyright 2026 The sonalab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sona/plot.hpp"
#include "sona/run.hpp"
#include "sona/run_config.hpp"
#include "sona/sweep.hpp"

using namespace sona;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sona_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig tiny_config(const std::string& method = "sona") {
  RunConfig rc;
  rc.method = method;
  rc.mog.class_count = 3;
  rc.batch = 32;
  rc.iters = 40;
  rc.eval_every = 20;
  rc.eval_samples = 96;
  rc.metrics.final_w2_samples = 128;
  rc.metrics.per_class_samples = 64;
  rc.seeds = {0, 1};
  return rc;
}

}  // namespace

TEST_CASE("run config: defaults, parsing and strict unknown-key rejection") {
  const auto rc = run_config_from_json(nlohmann::json::parse("{}"));
  CHECK(rc.method == "sona");
  CHECK(rc.batch == 256);
  CHECK(rc.iters == 15000);
  CHECK(rc.update_ratio == 1);
  CHECK(rc.lr == 1e-4);
  CHECK(rc.mog.radius == 0.75);
  CHECK(rc.mog.component_std == 0.03);
  CHECK(rc.metrics.final_w2_samples == 4096);
  CHECK(rc.metrics.per_class_samples == 1024);
  CHECK(rc.resolved_epsilon() == 0.03);
  CHECK(rc.seeds == std::vector<uint64_t>{0, 1, 2, 3, 4});

  const auto full = run_config_from_json(nlohmann::json::parse(R"({
    "method": "pdgan",
    "mog": {"class_count": 12, "radius": 1.5, "component_std": 0.05, "phase": 0.1},
    "train": {"batch": 64, "iters": 100, "update_ratio": 2, "lr": 0.001,
              "eval_every": 50, "eval_samples": 256},
    "metrics": {"final_w2_samples": 512, "per_class_samples": 128, "epsilon": 0.08},
    "seeds": [7],
    "output_dir": "out"
  })"));
  CHECK(full.method == "pdgan");
  CHECK(full.mog.class_count == 12);
  CHECK(full.update_ratio == 2);
  CHECK(full.resolved_epsilon() == 0.08);

  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"methdo": "sona"})")),
                  ConfigError);
  CHECK_THROWS_AS(
      run_config_from_json(nlohmann::json::parse(R"({"train": {"lrr": 0.1}})")), ConfigError);
  CHECK_THROWS_AS(
      run_config_from_json(nlohmann::json::parse(R"({"mog": {"classes": 3}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"method": "wgan"})")),
                  ConfigError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"seeds": []})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"train": {"lr": "fast"}})")),
                  ConfigError);

  // Field-level message names the offending key.
  try {
    run_config_from_json(nlohmann::json::parse(R"({"train": {"itres": 5}})"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.itres") != std::string::npos);
  }
}

TEST_CASE("run_one: writes the full run directory with consistent contents") {
  const auto root = fresh_dir("run_one");
  const auto rc = tiny_config();
  const auto out = run_one(rc, 1, root);

  CHECK(out.dir == root / "sona_N3_seed1");
  for (const char* f : {"config.json", "metrics.jsonl", "timings.jsonl", "best_checkpoint.json",
                        "final_report.json"})
    CHECK(fs::exists(out.dir / f));

  const auto cfg = load_json_file(out.dir / "config.json");
  CHECK(cfg.at("seed").get<uint64_t>() == 1);
  CHECK(cfg.at("metadata").at("rng_algorithm").get<std::string>() == Rng::algorithm());

  const auto report = load_json_file(out.dir / "final_report.json");
  CHECK(report.at("method").get<std::string>() == "sona");
  CHECK(report.at("class_count").get<int>() == 3);
  CHECK(report.at("cw2").size() == 3);
  CHECK(report.at("config_hash").get<std::string>() ==
        load_json_file(out.dir / "best_checkpoint.json").at("config_hash").get<std::string>());

  // Every metrics line parses and follows the schema.
  std::ifstream in(out.dir / "metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("iteration"));
    CHECK(j.contains("w2"));
    CHECK(j.contains("cw2_mean"));
    CHECK(j.contains("losses"));
    CHECK(j.contains("s"));
    CHECK(!j.contains("wall_ms"));  // timing lives in timings.jsonl
    ++lines;
  }
  CHECK(lines == 3);  // iterations 0, 20, 40
}

TEST_CASE("run_one: zero-iteration config still produces a valid report") {
  const auto root = fresh_dir("run_zero");
  auto rc = tiny_config();
  rc.iters = 0;
  const auto out = run_one(rc, 0, root);
  const auto report = load_json_file(out.dir / "final_report.json");
  CHECK(report.at("best_iteration").get<int>() == 0);
  CHECK(std::isfinite(report.at("w2").get<double>()));
}

TEST_CASE("run_one: identical config and seed give bit-identical metrics.jsonl") {
  const auto rc = tiny_config();
  const auto a = run_one(rc, 3, fresh_dir("det_a"));
  const auto b = run_one(rc, 3, fresh_dir("det_b"));
  CHECK(slurp(a.dir / "metrics.jsonl") == slurp(b.dir / "metrics.jsonl"));
  CHECK(slurp(a.dir / "best_checkpoint.json") == slurp(b.dir / "best_checkpoint.json"));
  CHECK(slurp(a.dir / "final_report.json") == slurp(b.dir / "final_report.json"));
}

TEST_CASE("sweep: grid size, resume, failure counting and CSV output") {
  const auto root = fresh_dir("sweep");
  auto rc = tiny_config();

  SweepOptions opt;
  opt.methods = {"sona", "pdgan"};
  opt.class_counts = {2, 3};
  opt.seeds = {0, 1};
  opt.jobs = 2;

  const auto summary = run_sweep(rc, opt, root, nullptr);
  CHECK(summary.cells.size() == 8);
  int ok = 0, resumed = 0;
  for (const auto& c : summary.cells) {
    CHECK(c.ok);
    resumed += c.resumed ? 1 : 0;
    ++ok;
  }
  CHECK(ok == 8);
  CHECK(resumed == 0);

  // Aggregates: one per (method, N) with seed counts and NF consistency.
  CHECK(summary.aggregates.size() == 4);
  for (const auto& agg : summary.aggregates) {
    CHECK(agg.seeds == 2);
    int nf = 0;
    for (const auto& c : summary.cells)
      if (c.method == agg.method && c.class_count == agg.class_count && c.is_failure) ++nf;
    CHECK(agg.nf == nf);
  }

  const std::string csv = summary_csv(summary);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);  // header + 8 rows
  write_file_atomic(root / "summary.csv", csv);

  // Second pass resumes every cell without retraining.
  const auto again = run_sweep(rc, opt, root, nullptr);
  for (const auto& c : again.cells) {
    CHECK(c.ok);
    CHECK(c.resumed);
  }
  // Resumed metrics agree with the first pass.
  for (size_t i = 0; i < again.cells.size(); ++i)
    CHECK(again.cells[i].w2 == summary.cells[i].w2);
}

TEST_CASE("sweep: a failing cell is recorded and the sweep continues") {
  const auto root = fresh_dir("sweep_fail");
  auto rc = tiny_config();
  SweepOptions opt;
  opt.methods = {"sona", "not_a_method"};
  opt.class_counts = {2};
  opt.seeds = {0};
  opt.jobs = 1;
  const auto summary = run_sweep(rc, opt, root, nullptr);
  REQUIRE(summary.cells.size() == 2);
  int ok = 0, failed = 0;
  for (const auto& c : summary.cells) {
    if (c.ok) ++ok;
    else {
      ++failed;
      CHECK(!c.error.empty());
    }
  }
  CHECK(ok == 1);
  CHECK(failed == 1);
}

TEST_CASE("plots: deterministic bytes, class legend and no-data handling") {
  const auto root = fresh_dir("plots");
  auto rc = tiny_config();
  const auto run = run_one(rc, 0, root);

  const std::string a = render_scatter(run.dir, 64);
  const std::string b = render_scatter(run.dir, 64);
  CHECK(a == b);
  CHECK(a.find("<svg") != std::string::npos);
  // Exactly one legend entry per class.
  size_t count = 0, pos = 0;
  while ((pos = a.find("legend-entry", pos)) != std::string::npos) {
    ++count;
    pos += 1;
  }
  CHECK(count == 3);

  // Empty scatter stays valid SVG with a caption and nonzero dimensions.
  const std::string empty = svg::scatter_figure(Tensor(0, 2), {}, Tensor(0, 2), {}, 0);
  CHECK(empty.find("<svg") != std::string::npos);
  CHECK(empty.find("no data") != std::string::npos);
  CHECK(empty.find("width='0'") == std::string::npos);

  // Curves from a sweep directory.
  SweepOptions opt;
  opt.methods = {"sona"};
  opt.class_counts = {2, 3};
  opt.seeds = {0};
  opt.jobs = 1;
  const auto summary = run_sweep(rc, opt, root, nullptr);
  write_file_atomic(root / "summary.csv", summary_csv(summary));
  const std::string curves = render_curves(root);
  CHECK(curves.find("<svg") != std::string::npos);
  CHECK(curves.find("polyline") != std::string::npos);
  CHECK(render_curves(root) == curves);

  // Directory dispatch.
  const auto out_dir = fresh_dir("plots_out");
  const auto files = render_plots(root, out_dir);  // sweep dir -> curves.svg
  REQUIRE(files.size() == 1);
  CHECK(files[0].filename() == "curves.svg");
  const auto files2 = render_plots(run.dir, fresh_dir("plots_out2"));
  REQUIRE(files2.size() == 1);
  CHECK(files2[0].filename() == "scatter.svg");

  // Unrecognized directory still yields valid SVGs.
  const auto files3 = render_plots(fresh_dir("plots_empty"), fresh_dir("plots_out3"));
  CHECK(files3.size() == 2);
  for (const auto& f : files3) CHECK(slurp(f).find("<svg") != std::string::npos);
}

TEST_CASE("atomic writes leave no temp files behind") {
  const auto root = fresh_dir("atomic");
  write_file_atomic(root / "x.json", "{}\n");
  CHECK(fs::exists(root / "x.json"));
  CHECK(!fs::exists(root / "x.json.tmp"));
  CHECK(slurp(root / "x.json") == "{}\n");
}
