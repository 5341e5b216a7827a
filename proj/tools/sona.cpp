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

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sona/plot.hpp"
#include "sona/run.hpp"
#include "sona/sweep.hpp"
#include "sona/verify_suite.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitNumericAbort = 3;

sona::RunConfig load_config(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw sona::ConfigError("config file not found: " + path);
  return sona::run_config_from_json(sona::load_json_file(path));
}

std::filesystem::path output_root(const sona::RunConfig& rc) {
  if (const char* env = std::getenv("SONA_OUTPUT_ROOT"); env != nullptr && *env != '\0')
    return env;
  return rc.output_dir;
}

// "0..4" or "0,1,2".
std::vector<uint64_t> parse_seed_list(const std::string& text) {
  std::vector<uint64_t> seeds;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const uint64_t lo = std::stoull(text.substr(0, dots));
    const uint64_t hi = std::stoull(text.substr(dots + 2));
    if (hi < lo) throw sona::ConfigError("seed range '" + text + "' is empty");
    for (uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw sona::ConfigError("no seeds in '" + text + "'");
  return seeds;
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& s : split_csv(text)) out.push_back(std::stoi(s));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional-GAN laboratory: separate naturalness/alignment "
               "discriminator on a 2-D mixture-of-Gaussians benchmark"};
  app.require_subcommand(1);

  std::string config_path, method_override, seeds_text, classes_text;
  int64_t seed_override = -1;
  int classes_override = -1;
  int jobs = 0;
  std::string plot_input, plot_out = ".";

  auto* train = app.add_subcommand("train", "train one model and write a run directory");
  train->add_option("--config", config_path, "run config JSON")->required();
  train->add_option("--seed", seed_override, "seed override (default: first config seed)");
  train->add_option("--method", method_override,
                    "method override (sona|sona_no_mm|pdgan|san_only)");
  train->add_option("--classes", classes_override, "class-count override");

  auto* sweep = app.add_subcommand("sweep", "run a methods x classes x seeds grid");
  sweep->add_option("--config", config_path, "run config JSON")->required();
  std::string methods_text = "sona,sona_no_mm,pdgan";
  classes_text = "6,12,18,24,30,36";
  seeds_text = "";
  sweep->add_option("--methods", methods_text, "comma-separated methods");
  sweep->add_option("--classes", classes_text, "comma-separated class counts");
  sweep->add_option("--seeds", seeds_text, "seed list: 0..4 or 0,1,2");
  sweep->add_option("--jobs", jobs, "worker count (default: hardware cores)");

  auto* plot = app.add_subcommand("plot", "render SVG figures for a run or sweep directory");
  plot->add_option("--input", plot_input, "run or sweep directory")->required();
  plot->add_option("--out", plot_out, "output directory (default: .)");

  app.add_subcommand("verify", "run the verification battery (gradients, oracles, OT)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (train->parsed()) {
      sona::RunConfig rc = load_config(config_path);
      if (!method_override.empty()) rc.method = method_override;
      if (classes_override > 0) rc.mog.class_count = classes_override;
      rc.validate();
      const uint64_t seed =
          seed_override >= 0 ? static_cast<uint64_t>(seed_override) : rc.seeds.front();
      const auto out = sona::run_one(rc, seed, output_root(rc));
      std::cout << out.dir.string() << "\n";
      std::cout << "best iteration " << out.best_iteration << ", W2 " << out.report.w2
                << ", cW2 mean " << out.report.cw2_mean
                << (out.report.is_failure ? " (failure)" : "") << "\n";
      return kExitOk;
    }

    if (sweep->parsed()) {
      sona::RunConfig rc = load_config(config_path);
      sona::SweepOptions opt;
      opt.methods = split_csv(methods_text);
      opt.class_counts = parse_int_list(classes_text);
      opt.seeds = seeds_text.empty() ? rc.seeds : parse_seed_list(seeds_text);
      opt.jobs = jobs;
      for (const auto& m : opt.methods) sona::method_from_string(m);
      if (opt.class_counts.empty()) throw sona::ConfigError("empty class list");

      const auto root = output_root(rc);
      std::filesystem::create_directories(root);
      const auto summary = sona::run_sweep(rc, opt, root, &std::cout);
      sona::write_file_atomic(root / "summary.csv", sona::summary_csv(summary));
      sona::write_file_atomic(root / "aggregate.csv", sona::aggregate_csv(summary));
      std::cout << "\n" << sona::aggregate_table(summary);
      for (const auto& cell : summary.cells)
        if (!cell.ok) {
          std::cout << "sweep finished with failed cells\n";
          return kExitNumericAbort;
        }
      return kExitOk;
    }

    if (plot->parsed()) {
      if (!std::filesystem::exists(plot_input))
        throw sona::ConfigError("input directory not found: " + plot_input);
      for (const auto& p : sona::render_plots(plot_input, plot_out))
        std::cout << p.string() << "\n";
      return kExitOk;
    }

    // verify
    const auto checks = sona::run_verification();
    return print_verification(checks, std::cout) ? kExitOk : kExitVerifyFailure;
  } catch (const sona::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const sona::NumericError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumericAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerifyFailure;
  }
}
