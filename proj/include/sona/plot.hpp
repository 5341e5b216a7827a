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

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sona/run.hpp"
#include "sona/svg.hpp"
#include "sona/sweep.hpp"

namespace sona {

/// Regenerates samples from a run directory's best checkpoint and renders
/// the truth-versus-generated scatter. Sampling uses streams derived from
/// the run seed, so the bytes are reproducible.
inline std::string render_scatter(const std::filesystem::path& run_dir, int samples = 2048) {
  const nlohmann::json cfg_json = load_json_file(run_dir / "config.json");
  const RunConfig rc = run_config_from_json(cfg_json);
  const uint64_t seed = cfg_json.at("seed").get<uint64_t>();
  const Checkpoint best = checkpoint_from_json(load_json_file(run_dir / "best_checkpoint.json"));

  Trainer trainer(rc.train_config(seed));
  restore_params(best, trainer.all_params());

  const int n = std::max(samples, rc.mog.class_count);
  Rng rng = Rng::derive(seed, 4);
  std::vector<int> y(n);
  for (auto& v : y) v = rng.uniform_int(rc.mog.class_count);
  const Tensor truth = sample_conditional(rc.mog, y, rng);
  const Tensor generated = trainer.model_sample(y, rng);
  return svg::scatter_figure(truth, y, generated, y, rc.mog.class_count);
}

/// Renders the W2/cW2/NF-versus-N panels from a sweep's summary.csv.
inline std::string render_curves(const std::filesystem::path& sweep_dir) {
  svg::CurveSeries w2s, cw2s, nfs;

  const auto csv_path = sweep_dir / "summary.csv";
  if (std::filesystem::exists(csv_path)) {
    // method -> N -> per-seed values
    std::map<std::string, std::map<int, std::vector<double>>> w2_cells, cw2_cells;
    std::map<std::string, std::map<int, int>> failures;

    std::ifstream in(csv_path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string method, n_s, seed_s, w2_s, cw2_s, fail_s;
      std::getline(ss, method, ',');
      std::getline(ss, n_s, ',');
      std::getline(ss, seed_s, ',');
      std::getline(ss, w2_s, ',');
      std::getline(ss, cw2_s, ',');
      std::getline(ss, fail_s, ',');
      const int n = std::stoi(n_s);
      w2_cells[method][n].push_back(std::stod(w2_s));
      cw2_cells[method][n].push_back(std::stod(cw2_s));
      failures[method][n] += fail_s == "1" ? 1 : 0;
    }

    const auto to_series = [](const std::map<std::string, std::map<int, std::vector<double>>>&
                                  cells) {
      svg::CurveSeries out;
      for (const auto& [method, by_n] : cells) {
        for (const auto& [n, vals] : by_n) {
          double mean, sd;
          detail::mean_std(vals, &mean, &sd);
          out[method].push_back({n, mean, std::max(0.0, mean - sd), mean + sd});
        }
      }
      return out;
    };
    w2s = to_series(w2_cells);
    cw2s = to_series(cw2_cells);
    for (const auto& [method, by_n] : failures)
      for (const auto& [n, count] : by_n) {
        const double c = count;
        nfs[method].push_back({n, c, c, c});
      }
  }
  return svg::curves_figure(w2s, cw2s, nfs);
}

/// Dispatches on directory contents: a run directory gets scatter.svg, a
/// sweep directory gets curves.svg; an unrecognized directory yields both
/// placeholders so the output is always valid SVG.
inline std::vector<std::filesystem::path> render_plots(const std::filesystem::path& input,
                                                       const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  const bool is_run = std::filesystem::exists(input / "best_checkpoint.json");
  const bool is_sweep = std::filesystem::exists(input / "summary.csv");

  if (is_run) {
    const auto path = out_dir / "scatter.svg";
    write_file_atomic(path, render_scatter(input));
    written.push_back(path);
  }
  if (is_sweep || !is_run) {
    const auto path = out_dir / "curves.svg";
    write_file_atomic(path, render_curves(input));
    written.push_back(path);
  }
  if (!is_run && !is_sweep) {
    const auto path = out_dir / "scatter.svg";
    write_file_atomic(path, svg::scatter_figure(Tensor(0, 2), {}, Tensor(0, 2), {}, 0));
    written.push_back(path);
  }
  return written;
}

}  // namespace sona
