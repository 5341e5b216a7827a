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
#include <string>
#include <vector>

#include "sona/tape.hpp"
#include "sona/tensor.hpp"

namespace sona {

/// Central-difference gradient of `eval` with respect to every entry of
/// `param`. `eval` must recompute the loss from the tensor's current values;
/// the tensor is restored on return.
inline std::vector<double> finite_diff_grad(const std::function<double()>& eval, Tensor& param,
                                            double step) {
  if (step <= 0.0) throw ContractError("finite_diff_grad: step must be positive");
  std::vector<double> g(param.size());
  for (size_t i = 0; i < param.size(); ++i) {
    const double saved = param.values[i];
    param.values[i] = saved + step;
    const double up = eval();
    param.values[i] = saved - step;
    const double down = eval();
    param.values[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw ContractError("finite_diff_grad: non-finite loss at probe " + std::to_string(i));
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

/// Relative error with a floor so that near-zero pairs are compared
/// absolutely; small enough that sign flips and dropped terms still blow
/// past any reasonable tolerance.
inline double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-2});
}

struct GradCheck {
  double max_rel_err = 0.0;
  std::string worst;  // "param[i]" of the worst entry
};

/// Compares tape gradients of the scalar built by `make_loss` against
/// central finite differences over every listed parameter. Stop-gradient
/// branches are captured on the reference pass and replayed during the
/// probes, so the probed scalar is exactly the function whose gradient the
/// tape defines.
inline GradCheck check_gradients(const std::function<Val(Tape&)>& make_loss,
                                 const std::vector<std::pair<std::string, Tensor*>>& params,
                                 double step = 1e-5) {
  SgTrace trace;

  for (auto& [name, p] : params) p->zero_grad();
  Tape t(&trace);
  Val loss = make_loss(t);
  t.backward(loss);

  trace.replay = true;
  const auto eval = [&]() {
    Tape probe(&trace);
    return probe.scalar(make_loss(probe));
  };

  GradCheck out;
  for (auto& [name, p] : params) {
    if (!p->requires_grad) continue;
    const std::vector<double> fd = finite_diff_grad(eval, *p, step);
    for (size_t i = 0; i < fd.size(); ++i) {
      const double ad = p->grad_allocated() ? p->grad[i] : 0.0;
      const double e = rel_err(ad, fd[i]);
      if (e > out.max_rel_err) {
        out.max_rel_err = e;
        out.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

}  // namespace sona
