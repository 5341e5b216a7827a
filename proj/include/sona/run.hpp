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
#include <string>

#include <json.hpp>

#include "sona/checkpoint.hpp"
#include "sona/metrics.hpp"
#include "sona/run_config.hpp"
#include "sona/trainer.hpp"

namespace sona {

inline std::string run_dir_name(const std::string& method, int class_count, uint64_t seed) {
  return method + "_N" + std::to_string(class_count) + "_seed" + std::to_string(seed);
}

struct RunOutput {
  std::filesystem::path dir;
  MetricReport report;
  int best_iteration = 0;
};

/// Final metrics of a checkpoint at full sample counts, with a dedicated
/// stream so they are independent of training draws.
inline MetricReport final_metrics(Trainer& trainer, const RunConfig& rc, uint64_t seed) {
  Rng rng = Rng::derive(seed, 3);
  const MogSpec spec = rc.mog;
  const ClassSampler data = [&spec](const std::vector<int>& y, Rng& r) {
    return sample_conditional(spec, y, r);
  };
  const ClassSampler model = [&trainer](const std::vector<int>& y, Rng& r) {
    return trainer.model_sample(y, r);
  };
  return cw2_and_nf(data, model, spec.class_count, rc.resolved_epsilon(),
                    rc.metrics.per_class_samples, rc.metrics.final_w2_samples, rng);
}

/// Trains one configuration and writes the run directory: resolved
/// config.json, metrics.jsonl (deterministic), timings.jsonl (measured),
/// best_checkpoint.json and final_report.json.
inline RunOutput run_one(const RunConfig& rc, uint64_t seed,
                         const std::filesystem::path& out_root) {
  rc.validate();
  const std::filesystem::path dir =
      out_root / run_dir_name(rc.method, rc.mog.class_count, seed);
  std::filesystem::create_directories(dir);

  nlohmann::json resolved = run_config_to_json(rc);
  resolved["seed"] = seed;
  const std::string hash = config_hash(resolved);
  write_file_atomic(dir / "config.json", resolved.dump(2) + "\n");

  Trainer trainer(rc.train_config(seed));
  const TrainResult result = trainer.train();

  std::string metrics_lines, timing_lines;
  for (const auto& rec : result.history) {
    nlohmann::json line{{"iteration", rec.iteration},
                        {"w2", rec.w2},
                        {"cw2_mean", rec.cw2_mean},
                        {"losses", rec.losses},
                        {"s", rec.s}};
    metrics_lines += line.dump() + "\n";
    timing_lines +=
        nlohmann::json{{"iteration", rec.iteration}, {"wall_ms", rec.wall_ms}}.dump() + "\n";
  }
  write_file_atomic(dir / "metrics.jsonl", metrics_lines);
  write_file_atomic(dir / "timings.jsonl", timing_lines);
  write_file_atomic(dir / "best_checkpoint.json",
                    checkpoint_to_json(result.best, hash).dump() + "\n");

  restore_params(result.best, trainer.all_params());
  const MetricReport report = final_metrics(trainer, rc, seed);

  nlohmann::json final_report = to_json(report);
  final_report["method"] = rc.method;
  final_report["class_count"] = rc.mog.class_count;
  final_report["seed"] = seed;
  final_report["best_iteration"] = result.best.iteration;
  final_report["config_hash"] = hash;
  write_file_atomic(dir / "final_report.json", final_report.dump(2) + "\n");

  return RunOutput{dir, report, result.best.iteration};
}

}  // namespace sona
