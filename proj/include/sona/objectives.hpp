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
#include <string>
#include <utility>
#include <vector>

#include "sona/nets.hpp"
#include "sona/tape.hpp"
#include "sona/tensor.hpp"

namespace sona {

// ---------------------------------------------------------------------------
// Scaled logsigmoid: logsigma(s * t) / s with learnable s > 0. Used in every
// maximization term so the learnable coefficients reweight the objectives
// without changing their maximizers.
// ---------------------------------------------------------------------------

inline double scaled_logsigmoid(double s, double t) {
  if (s <= 0.0) throw ContractError("scaled_logsigmoid: s must be positive");
  return detail::stable_logsigmoid(s * t) / s;
}

inline Val scaled_logsigmoid(Tape& t, Val s, Val x) {
  if (t.scalar(s) <= 0.0) throw ContractError("scaled_logsigmoid: s must be positive");
  return t.div_scalar(t.logsigmoid(t.mul_scalar(x, s)), s);
}

inline Val scaled_logsigmoid(Tape& t, double s, Val x) {
  return scaled_logsigmoid(t, t.constant_scalar(s), x);
}

/// Closed-form d/ds [logsigma(s*delta)/s]
///   = (1/s^2) * ( s*delta / (exp(s*delta) + 1) - logsigma(s*delta) ).
inline double scaled_logsigmoid_ds(double s, double delta) {
  if (s <= 0.0) throw ContractError("scaled_logsigmoid_ds: s must be positive");
  const double sd = s * delta;
  return (sd * detail::stable_sigmoid(-sd) - detail::stable_logsigmoid(sd)) / (s * s);
}

// ---------------------------------------------------------------------------
// Batch assembly for one discriminator step.
// ---------------------------------------------------------------------------

/// Real batch with labels, its permuted negatives, and a generated batch for
/// the same labels. All three share the batch size.
struct BatchTriple {
  Tensor x_data;
  std::vector<int> y;
  Tensor x_neg;
  Tensor x_gen;

  void validate() const {
    const int n = x_data.rows;
    if (static_cast<int>(y.size()) != n || x_neg.rows != n || x_gen.rows != n)
      throw ContractError("BatchTriple: batch sizes disagree");
  }
};

// ---------------------------------------------------------------------------
// Slicing-adversarial objectives for the naturalness direction.
// ---------------------------------------------------------------------------

/// Maximization objective given precomputed live features. Direction terms
/// see frozen features (training omega only); the GAN term sees a frozen
/// omega (training h and the bias only) and carries the scale s.
inline Val v_san_from(Tape& t, SonaHead& head, Val h_data, Val h_gen, Val omega, Val s) {
  Val dir = t.sub(t.mean(t.rowdot(t.stop_gradient(h_data), omega)),
                  t.mean(t.rowdot(t.stop_gradient(h_gen), omega)));
  Val omega_frozen = t.stop_gradient(omega);
  Val f_data = head.naturalness(t, omega_frozen, h_data);
  Val f_gen = head.naturalness(t, omega_frozen, h_gen);
  Val gan = t.add(t.mean(scaled_logsigmoid(t, s, f_data)),
                  t.mean(scaled_logsigmoid(t, s, t.neg(f_gen))));
  return t.add(dir, gan);
}

inline Val v_san(Tape& t, FeatureNet& feat, SonaHead& head, Val x_data, Val x_gen, Val s) {
  Val h_d = feat.forward(t, x_data);
  Val h_g = feat.forward(t, x_gen);
  return v_san_from(t, head, h_d, h_g, head.omega(t), s);
}

inline Val v_san(Tape& t, FeatureNet& feat, SonaHead& head, Val x_data, Val x_gen, double s) {
  return v_san(t, feat, head, x_data, x_gen, t.constant_scalar(s));
}

/// Generator-side minimization: -E[<omega, h(x_g)>].
inline Val j_san_from(Tape& t, Val h_gen, Val omega) {
  return t.neg(t.mean(t.rowdot(h_gen, omega)));
}

inline Val j_san(Tape& t, FeatureNet& feat, SonaHead& head, Val x_gen) {
  return j_san_from(t, feat.forward(t, x_gen), head.omega(t));
}

// ---------------------------------------------------------------------------
// Bradley-Terry objectives for the alignment direction. Winners always come
// from the data joint; the naturalness term is frozen inside both losses so
// only the alignment task trains through them.
// ---------------------------------------------------------------------------

inline Val bt_winner_loser(Tape& t, SonaHead& head, Val omega, Val omega_y, Val h_w, Val h_l,
                           const std::vector<int>& y, Val s) {
  Val f_n_w = t.stop_gradient(head.naturalness(t, omega, h_w));
  Val f_a_w = head.alignment(t, omega, omega_y, h_w, y);
  Val f_n_l = t.stop_gradient(head.naturalness(t, omega, h_l));
  Val f_a_l = head.alignment(t, omega, omega_y, h_l, y);
  Val margin = t.sub(t.add(f_n_w, f_a_w), t.add(f_n_l, f_a_l));
  return t.mean(scaled_logsigmoid(t, s, margin));
}

/// Losers are generated samples conditioned on the same y.
inline Val v_bt_cond(Tape& t, FeatureNet& feat, SonaHead& head, const BatchTriple& batch, Val s) {
  batch.validate();
  Val h_w = feat.forward(t, t.constant(batch.x_data));
  Val h_l = feat.forward(t, t.constant(batch.x_gen));
  return bt_winner_loser(t, head, head.omega(t), head.omega_y(t), h_w, h_l, batch.y, s);
}

/// Losers are real samples drawn from the marginal (the permuted batch), so
/// real-but-mismatched pairs lose against matched ones.
inline Val v_bt_mm(Tape& t, FeatureNet& feat, SonaHead& head, const BatchTriple& batch, Val s) {
  batch.validate();
  Val h_w = feat.forward(t, t.constant(batch.x_data));
  Val h_l = feat.forward(t, t.constant(batch.x_neg));
  return bt_winner_loser(t, head, head.omega(t), head.omega_y(t), h_w, h_l, batch.y, s);
}

/// Generator-side pairing loss. The generated sample enters the naturalness
/// term through a stopped input, so generator gradients flow only through
/// the alignment term, orthogonally to omega. Unscaled.
inline Val j_bt_cond_from(Tape& t, SonaHead& head, Val omega, Val omega_y, Val h_gen_live,
                          Val h_gen_stopped, Val h_data, const std::vector<int>& y) {
  Val f_n_g = head.naturalness(t, omega, h_gen_stopped);
  Val f_a_g = head.alignment(t, omega, omega_y, h_gen_live, y);
  Val f_n_d = head.naturalness(t, omega, h_data);
  Val f_a_d = head.alignment(t, omega, omega_y, h_data, y);
  Val margin = t.sub(t.add(f_n_g, f_a_g), t.add(f_n_d, f_a_d));
  return t.neg(t.mean(t.logsigmoid(margin)));
}

inline Val j_bt_cond(Tape& t, FeatureNet& feat, SonaHead& head, Val x_gen, Val x_data,
                     const std::vector<int>& y) {
  Val h_gen_live = feat.forward(t, x_gen);
  Val h_gen_stopped = feat.forward(t, t.stop_gradient(x_gen));
  Val h_data = feat.forward(t, x_data);
  return j_bt_cond_from(t, head, head.omega(t), head.omega_y(t), h_gen_live, h_gen_stopped,
                        h_data, y);
}

// ---------------------------------------------------------------------------
// Classifier cross-entropy (InfoNCE) over a finite label set. Kept as a
// verification oracle; not part of the training objective.
// ---------------------------------------------------------------------------

/// Row-wise log-softmax with temperature.
inline Val log_softmax_rows(Tape& t, Val scores, double tau) {
  if (tau <= 0.0) throw ContractError("v_ce: temperature must be positive");
  Val scaled = t.scale(scores, 1.0 / tau);
  return t.sub_colvec(scaled, t.log(t.row_sum(t.exp(scaled))));
}

/// Mean log-softmax score of the true label; `scores` holds one row per
/// sample.
inline Val v_ce(Tape& t, Val scores, const std::vector<int>& y, double tau) {
  const int k = t.cols(scores);
  const int n = t.rows(scores);
  if (n != static_cast<int>(y.size()))
    throw ContractError("v_ce: label count does not match score rows");
  Tensor onehot(n, k);
  for (int i = 0; i < n; ++i) {
    if (y[i] < 0 || y[i] >= k)
      throw IndexError("v_ce: label " + std::to_string(y[i]) + " out of [0, " +
                       std::to_string(k) + ")");
    onehot.at(i, y[i]) = 1.0;
  }
  Val picked = t.row_sum(t.mul(log_softmax_rows(t, scores, tau), t.constant(std::move(onehot))));
  return t.mean(picked);
}

/// Exact expectation over a discrete joint: sum_{x,y} p(x,y) log softmax_y.
/// `table` is |X| x |Y| scores; `joint` the matching probability table.
inline Val v_ce_expectation(Tape& t, Val table, const Tensor& joint, double tau) {
  check_same_shape(t.value(table), joint, "v_ce_expectation");
  return t.sum(t.mul(log_softmax_rows(t, table, tau), t.constant(joint)));
}

// ---------------------------------------------------------------------------
// Plain non-saturating GAN pair for the projection-discriminator baseline.
// ---------------------------------------------------------------------------

struct GanPair {
  Val max_loss;  // discriminator side, to maximize
  Val min_loss;  // generator side (non-saturating), to minimize
};

/// Both sides from precomputed scores f(x, y); callers control which inputs
/// are detached.
inline GanPair gan_nonsaturating(Tape& t, Val f_data, Val f_gen) {
  Val max_loss = t.add(t.mean(t.logsigmoid(f_data)), t.mean(t.logsigmoid(t.neg(f_gen))));
  Val min_loss = t.neg(t.mean(t.logsigmoid(f_gen)));
  return {max_loss, min_loss};
}

// ---------------------------------------------------------------------------
// Learnable objective weights: Normalize(Softplus(raw)) with unit sum of
// squares, so no coefficient can run away during training.
// ---------------------------------------------------------------------------

class WeightTriplet {
 public:
  WeightTriplet() : raw_san_(Tensor::zeros(1, 1)), raw_btc_(Tensor::zeros(1, 1)),
                    raw_btm_(Tensor::zeros(1, 1)) {
    raw_san_.requires_grad = true;
    raw_btc_.requires_grad = true;
    raw_btm_.requires_grad = true;
  }

  struct Effective {
    Val san, btc, btm;
  };

  Effective effective(Tape& t) {
    Val sp_san = t.softplus(t.leaf(raw_san_));
    Val sp_btc = t.softplus(t.leaf(raw_btc_));
    Val sp_btm = t.softplus(t.leaf(raw_btm_));
    Val triple = t.unit_normalize(t.concat_cols(t.concat_cols(sp_san, sp_btc), sp_btm));
    return {t.gather_cols(triple, {0}), t.gather_cols(triple, {1}), t.gather_cols(triple, {2})};
  }

  struct EffectivePair {
    Val san, btc;
  };

  /// Two-way renormalization for the ablation without the mismatching loss.
  EffectivePair effective_no_mm(Tape& t) {
    Val sp_san = t.softplus(t.leaf(raw_san_));
    Val sp_btc = t.softplus(t.leaf(raw_btc_));
    Val pair = t.unit_normalize(t.concat_cols(sp_san, sp_btc));
    return {t.gather_cols(pair, {0}), t.gather_cols(pair, {1})};
  }

  /// Snapshot of the effective coefficients without touching a tape.
  std::array<double, 3> values() const {
    const double a = detail::stable_softplus(raw_san_.values[0]);
    const double b = detail::stable_softplus(raw_btc_.values[0]);
    const double c = detail::stable_softplus(raw_btm_.values[0]);
    const double norm = std::sqrt(a * a + b * b + c * c);
    return {a / norm, b / norm, c / norm};
  }

  std::array<double, 2> values_no_mm() const {
    const double a = detail::stable_softplus(raw_san_.values[0]);
    const double b = detail::stable_softplus(raw_btc_.values[0]);
    const double norm = std::sqrt(a * a + b * b);
    return {a / norm, b / norm};
  }

  Tensor& raw_san() { return raw_san_; }
  Tensor& raw_btc() { return raw_btc_; }
  Tensor& raw_btm() { return raw_btm_; }

  std::vector<std::pair<std::string, Tensor*>> named_params() {
    return {{"weights.raw_san", &raw_san_},
            {"weights.raw_btc", &raw_btc_},
            {"weights.raw_btm", &raw_btm_}};
  }

 private:
  Tensor raw_san_, raw_btc_, raw_btm_;
};

/// Free-function form of the effective coefficients.
inline std::array<double, 3> effective_weights(const WeightTriplet& w) {
  return w.values();
}

// ---------------------------------------------------------------------------
// Step-level totals.
// ---------------------------------------------------------------------------

struct DiscLoss {
  Val objective;  // to minimize: negated sum of the maximization terms
  Val v_san;
  Val v_bt_cond;
  Val v_bt_mm;  // id -1 when the mismatching loss is disabled
  bool has_mm = true;
};

/// Discriminator maximization with shared feature forwards. Evaluates to the
/// same numbers as summing the standalone losses.
inline DiscLoss total_discriminator_loss(Tape& t, FeatureNet& feat, SonaHead& head,
                                         WeightTriplet& weights, const BatchTriple& batch,
                                         bool use_mm = true) {
  batch.validate();
  Val h_d = feat.forward(t, t.constant(batch.x_data));
  Val h_g = feat.forward(t, t.constant(batch.x_gen));
  Val omega = head.omega(t);
  Val omega_y = head.omega_y(t);

  DiscLoss out;
  out.has_mm = use_mm;
  if (use_mm) {
    Val h_n = feat.forward(t, t.constant(batch.x_neg));
    auto s = weights.effective(t);
    out.v_san = v_san_from(t, head, h_d, h_g, omega, s.san);
    out.v_bt_cond = bt_winner_loser(t, head, omega, omega_y, h_d, h_g, batch.y, s.btc);
    out.v_bt_mm = bt_winner_loser(t, head, omega, omega_y, h_d, h_n, batch.y, s.btm);
    out.objective = t.neg(t.add(t.add(out.v_san, out.v_bt_cond), out.v_bt_mm));
  } else {
    auto s = weights.effective_no_mm(t);
    out.v_san = v_san_from(t, head, h_d, h_g, omega, s.san);
    out.v_bt_cond = bt_winner_loser(t, head, omega, omega_y, h_d, h_g, batch.y, s.btc);
    out.v_bt_mm = Val{};
    out.objective = t.neg(t.add(out.v_san, out.v_bt_cond));
  }
  return out;
}

struct GenLoss {
  Val objective;  // J_SAN + J_BT-c, to minimize
  Val j_san;
  Val j_bt_cond;
};

/// Generator minimization with a shared live feature forward of x_g.
inline GenLoss total_generator_loss(Tape& t, FeatureNet& feat, SonaHead& head, Val x_gen,
                                    Val x_data, const std::vector<int>& y) {
  Val h_gen_live = feat.forward(t, x_gen);
  Val h_gen_stopped = feat.forward(t, t.stop_gradient(x_gen));
  Val h_data = feat.forward(t, x_data);
  Val omega = head.omega(t);
  Val omega_y = head.omega_y(t);

  GenLoss out;
  out.j_san = j_san_from(t, h_gen_live, omega);
  out.j_bt_cond =
      j_bt_cond_from(t, head, omega, omega_y, h_gen_live, h_gen_stopped, h_data, y);
  out.objective = t.add(out.j_san, out.j_bt_cond);
  return out;
}

}  // namespace sona
