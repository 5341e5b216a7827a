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

#include <array>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "sona/rng.hpp"
#include "sona/tensor.hpp"

namespace sona {

/// Target distribution: N isotropic Gaussians with means evenly spaced on a
/// circle. Class probabilities are uniform.
struct MogSpec {
  int class_count = 1;
  double radius = 0.75;
  double component_std = 0.03;
  double phase = 0.0;

  void validate() const {
    if (class_count < 1) throw ContractError("MogSpec: class_count must be >= 1");
    if (radius <= 0.0) throw ContractError("MogSpec: radius must be positive");
    if (component_std <= 0.0) throw ContractError("MogSpec: component_std must be positive");
  }
};

/// Component means: mean_n = radius * (cos(phase + 2*pi*n/N), sin(...)).
inline std::vector<std::array<double, 2>> mog_means(const MogSpec& spec) {
  spec.validate();
  std::vector<std::array<double, 2>> means(spec.class_count);
  for (int n = 0; n < spec.class_count; ++n) {
    const double a = spec.phase + 2.0 * std::numbers::pi * n / spec.class_count;
    means[n] = {spec.radius * std::cos(a), spec.radius * std::sin(a)};
  }
  return means;
}

struct JointBatch {
  Tensor x;            // batch x 2
  std::vector<int> y;  // class ids
};

/// Joint draw: y uniform over classes, x = mean_y + std * N(0, I).
inline JointBatch sample_joint(const MogSpec& spec, Rng& rng, int batch) {
  spec.validate();
  const auto means = mog_means(spec);
  JointBatch out;
  out.x = Tensor(batch, 2);
  out.y.resize(batch);
  for (int i = 0; i < batch; ++i) {
    const int c = rng.uniform_int(spec.class_count);
    out.y[i] = c;
    out.x.at(i, 0) = means[c][0] + spec.component_std * rng.normal();
    out.x.at(i, 1) = means[c][1] + spec.component_std * rng.normal();
  }
  return out;
}

/// Samples conditioned on the given label vector.
inline Tensor sample_conditional(const MogSpec& spec, const std::vector<int>& y, Rng& rng) {
  spec.validate();
  const auto means = mog_means(spec);
  Tensor x(static_cast<int>(y.size()), 2);
  for (size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || y[i] >= spec.class_count)
      throw IndexError("sample_conditional: class id " + std::to_string(y[i]) + " out of [0, " +
                       std::to_string(spec.class_count) + ")");
    x.at(static_cast<int>(i), 0) = means[y[i]][0] + spec.component_std * rng.normal();
    x.at(static_cast<int>(i), 1) = means[y[i]][1] + spec.component_std * rng.normal();
  }
  return x;
}

/// Negative samples: the batch re-ordered by a uniform random permutation.
/// Fixed points are allowed; a permuted i.i.d. batch is exactly a draw from
/// the marginal.
inline Tensor make_negatives(const Tensor& x, Rng& rng) {
  if (x.rows < 2) throw ContractError("make_negatives: batch size must be >= 2");
  const std::vector<int> pi = rng.permutation(x.rows);
  Tensor out(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) out.at(i, j) = x.at(pi[i], j);
  return out;
}

}  // namespace sona
