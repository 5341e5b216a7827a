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

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sona/adam.hpp"
#include "sona/checkpoint.hpp"
#include "sona/metrics.hpp"
#include "sona/mog.hpp"
#include "sona/nets.hpp"
#include "sona/objectives.hpp"
#include "sona/rng.hpp"

namespace sona {

enum class Method { kSona, kSonaNoMm, kPdgan, kSanOnly };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::kSona: return "sona";
    case Method::kSonaNoMm: return "sona_no_mm";
    case Method::kPdgan: return "pdgan";
    case Method::kSanOnly: return "san_only";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "sona") return Method::kSona;
  if (s == "sona_no_mm") return Method::kSonaNoMm;
  if (s == "pdgan") return Method::kPdgan;
  if (s == "san_only") return Method::kSanOnly;
  throw ConfigError("unknown method '" + s + "' (expected sona, sona_no_mm, pdgan or san_only)");
}

struct TrainConfig {
  Method method = Method::kSona;
  MogSpec mog;
  int batch = 256;
  int iters = 15000;
  int update_ratio = 1;
  double lr = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double adam_eps = 1e-8;
  int eval_every = 500;
  int eval_samples = 2048;
  uint64_t seed = 0;

  void validate() const {
    mog.validate();
    if (batch < 2) throw ConfigError("TrainConfig: batch must be >= 2");
    if (iters < 0) throw ConfigError("TrainConfig: iters must be >= 0");
    if (update_ratio < 1) throw ConfigError("TrainConfig: update_ratio must be >= 1");
    if (lr <= 0.0) throw ConfigError("TrainConfig: lr must be positive");
    if (eval_every < 1) throw ConfigError("TrainConfig: eval_every must be >= 1");
    if (eval_samples < 2) throw ConfigError("TrainConfig: eval_samples must be >= 2");
  }
};

/// One metric evaluation during training. wall_ms is measured time and is
/// reported separately from the deterministic metric stream.
struct EvalRecord {
  int iteration = 0;
  double w2 = 0.0;
  double cw2_mean = 0.0;
  std::map<std::string, double> losses;  // most recent step, empty at iteration 0
  std::vector<double> s;                 // effective weights, when the method has them
  double wall_ms = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EvalRecord> history;
};

/// Alternating-update GAN trainer. Per outer iteration: `update_ratio`
/// discriminator steps (effective weights recomputed inside each), then one
/// generator step touching only the generator parameters. Evaluates W2
/// periodically and returns the lowest-W2 checkpoint.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg)
      : cfg_(std::move(cfg)),
        init_rng_(Rng::derive(cfg_.seed, 0)),
        train_rng_(Rng::derive(cfg_.seed, 1)),
        eval_rng_(Rng::derive(cfg_.seed, 2)),
        gen_(cfg_.mog.class_count, init_rng_),
        feat_(init_rng_),
        head_(cfg_.mog.class_count, FeatureNet::kFeatureDim, init_rng_),
        pd_(cfg_.mog.class_count, FeatureNet::kFeatureDim, init_rng_) {
    cfg_.validate();
    const AdamConfig adam{cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps};
    for (auto& [name, p] : all_params()) adam_.emplace(name, AdamState(adam));
  }

  const TrainConfig& config() const { return cfg_; }
  Generator& generator() { return gen_; }
  FeatureNet& feature_net() { return feat_; }
  SonaHead& sona_head() { return head_; }
  PdganHead& pdgan_head() { return pd_; }
  WeightTriplet& weights() { return weights_; }

  bool uses_sona_head() const {
    return cfg_.method == Method::kSona || cfg_.method == Method::kSonaNoMm ||
           cfg_.method == Method::kSanOnly;
  }
  bool uses_weights() const {
    return cfg_.method == Method::kSona || cfg_.method == Method::kSonaNoMm;
  }

  ParamRefs generator_params() { return gen_.named_params(); }

  /// Everything that is not the generator; used for freezing and snapshots.
  ParamRefs discriminator_params() {
    ParamRefs out = feat_.named_params();
    if (uses_sona_head()) {
      for (auto& p : head_.named_params()) out.push_back(p);
    } else {
      for (auto& p : pd_.named_params()) out.push_back(p);
    }
    if (uses_weights())
      for (auto& p : weights_.named_params()) out.push_back(p);
    return out;
  }

  /// The groups a discriminator step actually updates, per the method's
  /// objective (san_only trains no alignment directions and no weights;
  /// sona_no_mm trains only the two active weight scalars).
  ParamRefs trained_discriminator_params() {
    ParamRefs out = feat_.named_params();
    if (uses_sona_head()) {
      out.emplace_back("head.omega_raw", &head_.omega_raw());
      out.emplace_back("head.bias", &head_.bias_param());
      if (cfg_.method != Method::kSanOnly)
        out.emplace_back("head.omega_y_raw", &head_.omega_y_raw());
    } else {
      for (auto& p : pd_.named_params()) out.push_back(p);
    }
    if (cfg_.method == Method::kSona) {
      for (auto& p : weights_.named_params()) out.push_back(p);
    } else if (cfg_.method == Method::kSonaNoMm) {
      out.emplace_back("weights.raw_san", &weights_.raw_san());
      out.emplace_back("weights.raw_btc", &weights_.raw_btc());
    }
    return out;
  }

  ParamRefs all_params() {
    ParamRefs out = generator_params();
    for (auto& p : discriminator_params()) out.push_back(p);
    return out;
  }

  /// Current effective weights for logging; empty when the method has none.
  std::vector<double> effective_weight_values() const {
    if (cfg_.method == Method::kSona) {
      const auto s = weights_.values();
      return {s[0], s[1], s[2]};
    }
    if (cfg_.method == Method::kSonaNoMm) {
      const auto s = weights_.values_no_mm();
      return {s[0], s[1]};
    }
    return {};
  }

  /// One discriminator update on a fresh batch. Generator parameters are
  /// untouched (generated samples enter through a stop-gradient).
  void discriminator_step() {
    for (auto& [name, p] : all_params()) p->zero_grad();
    const JointBatch joint = sample_joint(cfg_.mog, train_rng_, cfg_.batch);
    const Tensor z = train_rng_.normal_matrix(cfg_.batch, Generator::kLatentDim);
    const Tensor x_neg = make_negatives(joint.x, train_rng_);

    Tape t;
    Val x_gen = t.stop_gradient(gen_.forward(t, z, joint.y));

    if (uses_sona_head()) {
      BatchTriple triple{joint.x, joint.y, x_neg, t.value(x_gen)};
      if (cfg_.method == Method::kSanOnly) {
        Val vsan = v_san(t, feat_, head_, t.constant(joint.x), x_gen, 1.0);
        record_loss("v_san", t.scalar(vsan));
        t.backward(t.neg(vsan));
      } else {
        const bool use_mm = cfg_.method == Method::kSona;
        auto parts = total_discriminator_loss(t, feat_, head_, weights_, triple, use_mm);
        record_loss("v_san", t.scalar(parts.v_san));
        record_loss("v_bt_cond", t.scalar(parts.v_bt_cond));
        if (use_mm) record_loss("v_bt_mm", t.scalar(parts.v_bt_mm));
        t.backward(parts.objective);
      }
    } else {
      Val f_data = pdgan_forward(t, pd_, feat_, t.constant(joint.x), joint.y);
      Val f_gen = pdgan_forward(t, pd_, feat_, x_gen, joint.y);
      Val max_loss = gan_nonsaturating(t, f_data, f_gen).max_loss;
      record_loss("v_gan", t.scalar(max_loss));
      t.backward(t.neg(max_loss));
    }
    check_losses_finite("discriminator");
    for (auto& [name, p] : trained_discriminator_params()) adam_.at(name).step(*p);
  }

  /// One generator update on a fresh batch; discriminator parameters frozen.
  void generator_step() {
    for (auto& [name, p] : all_params()) p->zero_grad();
    const JointBatch joint = sample_joint(cfg_.mog, train_rng_, cfg_.batch);
    const Tensor z = train_rng_.normal_matrix(cfg_.batch, Generator::kLatentDim);

    FreezeGuard freeze(discriminator_params());
    Tape t;
    Val x_g = gen_.forward(t, z, joint.y);

    if (uses_sona_head()) {
      if (cfg_.method == Method::kSanOnly) {
        Val loss = j_san(t, feat_, head_, x_g);
        record_loss("j_san", t.scalar(loss));
        t.backward(loss);
      } else {
        auto parts = total_generator_loss(t, feat_, head_, x_g, t.constant(joint.x), joint.y);
        record_loss("j_san", t.scalar(parts.j_san));
        record_loss("j_bt_cond", t.scalar(parts.j_bt_cond));
        t.backward(parts.objective);
      }
    } else {
      Val f_data = pdgan_forward(t, pd_, feat_, t.constant(joint.x), joint.y);
      Val f_gen = pdgan_forward(t, pd_, feat_, x_g, joint.y);
      Val min_loss = gan_nonsaturating(t, f_data, f_gen).min_loss;
      record_loss("j_gan", t.scalar(min_loss));
      t.backward(min_loss);
    }
    check_losses_finite("generator");
    for (auto& [name, p] : generator_params()) adam_.at(name).step(*p);
  }

  /// Draws model samples for the given labels with the supplied stream.
  Tensor model_sample(const std::vector<int>& y, Rng& rng) { return gen_.sample(y, rng); }

  EvalRecord evaluate(int iteration) {
    const auto t0 = std::chrono::steady_clock::now();
    EvalRecord rec;
    rec.iteration = iteration;
    rec.losses = last_losses_;
    rec.s = effective_weight_values();

    const ClassSampler data = [this](const std::vector<int>& y, Rng& r) {
      return sample_conditional(cfg_.mog, y, r);
    };
    const ClassSampler model = [this](const std::vector<int>& y, Rng& r) {
      return model_sample(y, r);
    };
    // Cheap conditional proxy during training; the final report uses the
    // metrics module at full sample counts.
    const int per_class =
        std::max(64, cfg_.eval_samples / std::max(1, cfg_.mog.class_count));
    const MetricReport rep =
        cw2_and_nf(data, model, cfg_.mog.class_count, cfg_.mog.component_std, per_class,
                   cfg_.eval_samples, eval_rng_);
    rec.w2 = rep.w2;
    rec.cw2_mean = rep.cw2_mean;
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rec;
  }

  /// Runs the full schedule. The observer, when given, is called after every
  /// outer iteration.
  TrainResult train(const std::function<void(Trainer&, int)>& observer = {}) {
    TrainResult result;
    result.best.w2 = std::numeric_limits<double>::infinity();

    const auto consider = [&](int iteration) {
      EvalRecord rec = evaluate(iteration);
      result.history.push_back(rec);
      if (rec.w2 < result.best.w2)
        result.best = snapshot_params(all_params(), iteration, effective_weight_values(), rec.w2);
    };

    consider(0);
    for (int iter = 1; iter <= cfg_.iters; ++iter) {
      iteration_ = iter;
      for (int i = 0; i < cfg_.update_ratio; ++i) discriminator_step();
      generator_step();
      if (observer) observer(*this, iter);
      if (iter % cfg_.eval_every == 0 || iter == cfg_.iters) consider(iter);
    }
    return result;
  }

 private:
  // Temporarily clears requires_grad so frozen parameters cost no backward
  // work and provably receive no gradient.
  class FreezeGuard {
   public:
    explicit FreezeGuard(ParamRefs refs) : refs_(std::move(refs)) {
      for (auto& [name, p] : refs_) {
        saved_.push_back(p->requires_grad);
        p->requires_grad = false;
      }
    }
    ~FreezeGuard() {
      for (size_t i = 0; i < refs_.size(); ++i) refs_[i].second->requires_grad = saved_[i];
    }

   private:
    ParamRefs refs_;
    std::vector<bool> saved_;
  };

  void record_loss(const std::string& key, double value) { last_losses_[key] = value; }

  void check_losses_finite(const char* step) const {
    for (const auto& [key, value] : last_losses_) {
      if (!std::isfinite(value)) {
        std::string parts;
        for (const auto& [k, v] : last_losses_) parts += " " + k + "=" + std::to_string(v);
        throw NumericError("non-finite loss in " + std::string(step) + " step at iteration " +
                           std::to_string(iteration_) + ":" + parts);
      }
    }
  }

  TrainConfig cfg_;
  Rng init_rng_, train_rng_, eval_rng_;
  Generator gen_;
  FeatureNet feat_;
  SonaHead head_;
  PdganHead pd_;
  WeightTriplet weights_;
  std::map<std::string, AdamState> adam_;
  std::map<std::string, double> last_losses_;
  int iteration_ = 0;
};

}  // namespace sona
