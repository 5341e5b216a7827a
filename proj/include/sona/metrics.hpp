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

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <json.hpp>

#include "sona/assignment.hpp"
#include "sona/rng.hpp"
#include "sona/tensor.hpp"

namespace sona {

/// Empirical Wasserstein-2 distance between two equally sized point sets
/// (rows are samples). Equal weights make the optimal plan a permutation, so
/// an exact assignment solve suffices.
inline double w2(const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw ContractError("w2: sample sets differ in shape, " + a.shape_str() + " vs " +
                        b.shape_str());
  if (a.rows < 1) throw ContractError("w2: empty sample sets");
  const int n = a.rows;
  const int d = a.cols;
  AssignmentProblem p;
  p.n = n;
  p.cost.resize(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    const double* ai = &a.values[static_cast<size_t>(i) * d];
    for (int j = 0; j < n; ++j) {
      const double* bj = &b.values[static_cast<size_t>(j) * d];
      double c = 0.0;
      for (int k = 0; k < d; ++k) {
        const double diff = ai[k] - bj[k];
        c += diff * diff;
      }
      p.cost[static_cast<size_t>(i) * n + j] = c;
    }
  }
  const AssignmentResult r = solve_assignment(p);
  return std::sqrt(r.total_cost / n);
}

/// W2, per-class cW2 and the failure flag for one model checkpoint.
struct MetricReport {
  double w2 = 0.0;
  std::vector<double> cw2;
  double cw2_mean = 0.0;
  bool is_failure = false;
  double epsilon = 0.0;
  int pooled_samples = 0;
  int per_class_samples = 0;
};

inline nlohmann::json to_json(const MetricReport& r) {
  return nlohmann::json{{"w2", r.w2},
                        {"cw2", r.cw2},
                        {"cw2_mean", r.cw2_mean},
                        {"is_failure", r.is_failure},
                        {"epsilon", r.epsilon},
                        {"pooled_samples", r.pooled_samples},
                        {"per_class_samples", r.per_class_samples}};
}

inline MetricReport metric_report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.w2 = j.at("w2").get<double>();
  r.cw2 = j.at("cw2").get<std::vector<double>>();
  r.cw2_mean = j.at("cw2_mean").get<double>();
  r.is_failure = j.at("is_failure").get<bool>();
  r.epsilon = j.at("epsilon").get<double>();
  r.pooled_samples = j.at("pooled_samples").get<int>();
  r.per_class_samples = j.at("per_class_samples").get<int>();
  return r;
}

/// Draws samples for the given label vector; rows align with `y`.
using ClassSampler = std::function<Tensor(const std::vector<int>& y, Rng& rng)>;

/// Per-class W2 between data and model, the pooled unconditional W2, and the
/// failure flag (any class above epsilon).
inline MetricReport cw2_and_nf(const ClassSampler& data, const ClassSampler& model,
                               int class_count, double epsilon, int per_class_samples,
                               int pooled_samples, Rng& rng) {
  if (epsilon <= 0.0) throw ContractError("cw2_and_nf: epsilon must be positive");
  MetricReport rep;
  rep.epsilon = epsilon;
  rep.per_class_samples = per_class_samples;
  rep.pooled_samples = pooled_samples;
  rep.cw2.reserve(class_count);

  for (int c = 0; c < class_count; ++c) {
    const std::vector<int> y(per_class_samples, c);
    const Tensor xd = data(y, rng);
    const Tensor xm = model(y, rng);
    rep.cw2.push_back(w2(xd, xm));
  }
  double acc = 0.0;
  for (double v : rep.cw2) {
    acc += v;
    if (v > epsilon) rep.is_failure = true;
  }
  rep.cw2_mean = acc / class_count;

  std::vector<int> yd(pooled_samples), ym(pooled_samples);
  for (auto& v : yd) v = rng.uniform_int(class_count);
  for (auto& v : ym) v = rng.uniform_int(class_count);
  rep.w2 = w2(data(yd, rng), model(ym, rng));
  return rep;
}

}  // namespace sona
