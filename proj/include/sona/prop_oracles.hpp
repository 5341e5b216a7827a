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
#include <vector>

#include "sona/objectives.hpp"
#include "sona/rng.hpp"
#include "sona/tape.hpp"
#include "sona/tensor.hpp"

namespace sona {

/// Finite joint distribution over |X| x |Y| cells; the test bed on which the
/// loss maximizers can be compared against their closed forms.
struct DiscreteJoint {
  Tensor p;  // rows: x, cols: y

  void validate() const {
    double total = 0.0;
    for (double v : p.values) {
      if (v < 0.0) throw ContractError("DiscreteJoint: negative cell");
      total += v;
    }
    if (std::fabs(total - 1.0) > 1e-12)
      throw ContractError("DiscreteJoint: cells sum to " + std::to_string(total));
    for (int i = 0; i < p.rows; ++i)
      if (marginal_x(i) <= 0.0) throw ContractError("DiscreteJoint: zero x-marginal");
    for (int j = 0; j < p.cols; ++j)
      if (marginal_y(j) <= 0.0) throw ContractError("DiscreteJoint: zero y-marginal");
  }

  double marginal_x(int i) const {
    double s = 0.0;
    for (int j = 0; j < p.cols; ++j) s += p.at(i, j);
    return s;
  }
  double marginal_y(int j) const {
    double s = 0.0;
    for (int i = 0; i < p.rows; ++i) s += p.at(i, j);
    return s;
  }

  static DiscreteJoint from_table(Tensor t) {
    DiscreteJoint d{std::move(t)};
    d.validate();
    return d;
  }

  /// Random joint with all cells bounded away from zero.
  static DiscreteJoint random(Rng& rng, int nx, int ny) {
    Tensor t(nx, ny);
    double total = 0.0;
    for (auto& v : t.values) {
      v = 0.05 + rng.uniform01();
      total += v;
    }
    for (auto& v : t.values) v /= total;
    fixup_sum(t);
    return from_table(std::move(t));
  }

  /// Random joint with an exactly uniform y-marginal (each column sums to
  /// 1/ny), as Prop. 1 assumes.
  static DiscreteJoint random_uniform_y(Rng& rng, int nx, int ny) {
    Tensor t(nx, ny);
    for (int j = 0; j < ny; ++j) {
      double col = 0.0;
      for (int i = 0; i < nx; ++i) {
        t.at(i, j) = 0.05 + rng.uniform01();
        col += t.at(i, j);
      }
      for (int i = 0; i < nx; ++i) t.at(i, j) /= col * ny;
    }
    fixup_sum(t);
    return from_table(std::move(t));
  }

 private:
  // Absorbs the last rounding ulp so the normalization check is exact.
  static void fixup_sum(Tensor& t) {
    double total = 0.0;
    for (double v : t.values) total += v;
    t.values.back() += 1.0 - total;
  }
};

struct AscentConfig {
  double rate = 0.5;
  int steps = 20000;
  double grad_tol = 1e-6;
};

/// Exact expectation of the mismatching Bradley-Terry objective over the
/// joint: sum_y sum_{x_w} sum_{x_l} p(x_w, y) p(x_l) logsigma(F[x_w,y] -
/// F[x_l,y]).
inline Val v_bt_mm_expectation(Tape& t, Val table, const DiscreteJoint& joint) {
  const int nx = joint.p.rows, ny = joint.p.cols;
  Tensor ones_row = Tensor::full(1, nx, 1.0);
  Tensor ones_col = Tensor::full(nx, 1, 1.0);
  Val total;
  for (int y = 0; y < ny; ++y) {
    Val col = t.gather_cols(table, {y});
    Val margins = t.sub(t.matmul(col, t.constant(ones_row)),
                        t.matmul(t.constant(ones_col), t.transpose(col)));
    Tensor weight(nx, nx);
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nx; ++j) weight.at(i, j) = joint.p.at(i, y) * joint.marginal_x(j);
    Val term = t.sum(t.mul(t.constant(std::move(weight)), t.logsigmoid(margins)));
    total = y == 0 ? term : t.add(total, term);
  }
  return total;
}

namespace detail {

/// Plain gradient ascent on a free score table; the objectives here are
/// concave, so a fixed rate converges. Throws when the gradient has not
/// vanished within the budget.
inline Tensor ascend_table(const std::function<Val(Tape&, Val)>& objective, int nx, int ny,
                           const AscentConfig& cfg, const char* what) {
  Tensor table(nx, ny);
  table.requires_grad = true;
  for (int step = 0; step < cfg.steps; ++step) {
    table.zero_grad();
    Tape t;
    t.backward(objective(t, t.leaf(table)));
    for (size_t i = 0; i < table.size(); ++i) table.values[i] += cfg.rate * table.grad[i];
  }
  table.zero_grad();
  Tape t;
  t.backward(objective(t, t.leaf(table)));
  double norm = 0.0;
  for (double g : table.grad) norm += g * g;
  norm = std::sqrt(norm);
  if (norm > cfg.grad_tol)
    throw NumericError(std::string(what) + ": ascent did not converge, |grad| = " +
                       std::to_string(norm));
  return table;
}

}  // namespace detail

/// Maximizes the exact mismatching-BT expectation over a free table and
/// returns the largest absolute mismatch between score differences and
/// log-gap differences, compared within each y (the maximizer is only
/// identified up to a per-y constant).
inline double verify_prop4(const DiscreteJoint& joint, const AscentConfig& cfg = {}) {
  joint.validate();
  const int nx = joint.p.rows, ny = joint.p.cols;
  const Tensor table = detail::ascend_table(
      [&](Tape& t, Val f) { return v_bt_mm_expectation(t, f, joint); }, nx, ny, cfg,
      "verify_prop4");

  double worst = 0.0;
  for (int y = 0; y < ny; ++y) {
    const double py = joint.marginal_y(y);
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < nx; ++j) {
        const double gap_i = std::log(joint.p.at(i, y) / py) - std::log(joint.marginal_x(i));
        const double gap_j = std::log(joint.p.at(j, y) / py) - std::log(joint.marginal_x(j));
        const double got = table.at(i, y) - table.at(j, y);
        worst = std::max(worst, std::fabs(got - (gap_i - gap_j)));
      }
    }
  }
  return worst;
}

/// Same scheme for the classifier cross-entropy: requires a uniform
/// y-marginal and compares per-x score differences across y against
/// log p(y|x) differences (the maximizer is free up to a per-x constant).
inline double verify_prop1(const DiscreteJoint& joint, const AscentConfig& cfg = {},
                           double tau = 1.0) {
  joint.validate();
  const int nx = joint.p.rows, ny = joint.p.cols;
  for (int j = 0; j < ny; ++j)
    if (std::fabs(joint.marginal_y(j) - 1.0 / ny) > 1e-9)
      throw ContractError("verify_prop1: p(y) must be uniform");

  const Tensor table = detail::ascend_table(
      [&](Tape& t, Val f) { return v_ce_expectation(t, f, joint.p, tau); }, nx, ny, cfg,
      "verify_prop1");

  double worst = 0.0;
  for (int i = 0; i < nx; ++i) {
    const double px = joint.marginal_x(i);
    for (int a = 0; a < ny; ++a) {
      for (int b = 0; b < ny; ++b) {
        // Maximizer satisfies F/tau = log p(y|x) + r(x).
        const double ref =
            tau * (std::log(joint.p.at(i, a) / px) - std::log(joint.p.at(i, b) / px));
        const double got = table.at(i, a) - table.at(i, b);
        worst = std::max(worst, std::fabs(got - ref));
      }
    }
  }
  return worst;
}

}  // namespace sona
