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

#include <string>
#include <vector>

#include <json.hpp>

#include "sona/rng.hpp"
#include "sona/trainer.hpp"

namespace sona {

struct MetricsConfig {
  int final_w2_samples = 4096;
  int per_class_samples = 1024;
  double epsilon = 0.0;  // 0 means: use the component standard deviation
};

/// One experiment description as read from a config file. Unknown keys are
/// rejected so hyperparameter typos fail loudly.
struct RunConfig {
  std::string method = "sona";
  MogSpec mog = {8, 0.75, 0.03, 0.0};
  int batch = 256;
  int iters = 15000;
  int update_ratio = 1;
  double lr = 1e-4;
  int eval_every = 500;
  int eval_samples = 2048;
  MetricsConfig metrics;
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string output_dir = "runs";

  double resolved_epsilon() const {
    return metrics.epsilon > 0.0 ? metrics.epsilon : mog.component_std;
  }

  TrainConfig train_config(uint64_t seed) const {
    TrainConfig tc;
    tc.method = method_from_string(method);
    tc.mog = mog;
    tc.batch = batch;
    tc.iters = iters;
    tc.update_ratio = update_ratio;
    tc.lr = lr;
    tc.eval_every = eval_every;
    tc.eval_samples = eval_samples;
    tc.seed = seed;
    return tc;
  }

  void validate() const {
    method_from_string(method);
    train_config(0).validate();
    if (metrics.final_w2_samples < 2 || metrics.per_class_samples < 2)
      throw ConfigError("metrics: sample counts must be >= 2");
    if (seeds.empty()) throw ConfigError("seeds: at least one seed required");
  }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::vector<std::string>& known,
                           const std::string& scope) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    if (!ok)
      throw ConfigError("unknown config key '" + (scope.empty() ? key : scope + "." + key) + "'");
  }
}

template <typename T>
T get_field(const nlohmann::json& obj, const std::string& key, const T& fallback,
            const std::string& scope) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config field '" + (scope.empty() ? key : scope + "." + key) +
                      "' has the wrong type");
  }
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  // "seed" and "metadata" appear in resolved run-directory configs; both are
  // accepted so those files can be fed back in.
  detail::reject_unknown(
      j, {"method", "mog", "train", "metrics", "seeds", "seed", "output_dir", "metadata"}, "");

  RunConfig rc;
  rc.method = detail::get_field<std::string>(j, "method", rc.method, "");
  if (j.contains("mog")) {
    const auto& m = j.at("mog");
    detail::reject_unknown(m, {"class_count", "radius", "component_std", "phase"}, "mog");
    rc.mog.class_count = detail::get_field(m, "class_count", rc.mog.class_count, "mog");
    rc.mog.radius = detail::get_field(m, "radius", rc.mog.radius, "mog");
    rc.mog.component_std = detail::get_field(m, "component_std", rc.mog.component_std, "mog");
    rc.mog.phase = detail::get_field(m, "phase", rc.mog.phase, "mog");
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::reject_unknown(
        t, {"batch", "iters", "update_ratio", "lr", "eval_every", "eval_samples"}, "train");
    rc.batch = detail::get_field(t, "batch", rc.batch, "train");
    rc.iters = detail::get_field(t, "iters", rc.iters, "train");
    rc.update_ratio = detail::get_field(t, "update_ratio", rc.update_ratio, "train");
    rc.lr = detail::get_field(t, "lr", rc.lr, "train");
    rc.eval_every = detail::get_field(t, "eval_every", rc.eval_every, "train");
    rc.eval_samples = detail::get_field(t, "eval_samples", rc.eval_samples, "train");
  }
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    detail::reject_unknown(m, {"final_w2_samples", "per_class_samples", "epsilon"}, "metrics");
    rc.metrics.final_w2_samples =
        detail::get_field(m, "final_w2_samples", rc.metrics.final_w2_samples, "metrics");
    rc.metrics.per_class_samples =
        detail::get_field(m, "per_class_samples", rc.metrics.per_class_samples, "metrics");
    rc.metrics.epsilon = detail::get_field(m, "epsilon", rc.metrics.epsilon, "metrics");
  }
  rc.seeds = detail::get_field(j, "seeds", rc.seeds, "");
  rc.output_dir = detail::get_field(j, "output_dir", rc.output_dir, "");
  rc.validate();
  return rc;
}

/// Resolved configuration, including the fixed study constants recorded as
/// run metadata.
inline nlohmann::json run_config_to_json(const RunConfig& rc) {
  return nlohmann::json{
      {"method", rc.method},
      {"mog",
       {{"class_count", rc.mog.class_count},
        {"radius", rc.mog.radius},
        {"component_std", rc.mog.component_std},
        {"phase", rc.mog.phase}}},
      {"train",
       {{"batch", rc.batch},
        {"iters", rc.iters},
        {"update_ratio", rc.update_ratio},
        {"lr", rc.lr},
        {"eval_every", rc.eval_every},
        {"eval_samples", rc.eval_samples}}},
      {"metrics",
       {{"final_w2_samples", rc.metrics.final_w2_samples},
        {"per_class_samples", rc.metrics.per_class_samples},
        {"epsilon", rc.resolved_epsilon()}}},
      {"seeds", rc.seeds},
      {"output_dir", rc.output_dir},
      {"metadata",
       {{"rng_algorithm", Rng::algorithm()},
        {"adam", {{"beta1", 0.0}, {"beta2", 0.9}, {"eps", 1e-8}}},
        {"leaky_relu_slope", kLeakyReluSlope},
        {"direction_normalization", "per-forward"}}}};
}

}  // namespace sona
