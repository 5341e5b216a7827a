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
#include <string>
#include <utility>
#include <vector>

#include "sona/rng.hpp"
#include "sona/tape.hpp"
#include "sona/tensor.hpp"

namespace sona {

inline constexpr double kLeakyReluSlope = 0.01;

enum class Activation { kRelu, kLeakyRelu };

inline void normalize_rows_in_place(Tensor& t) {
  for (int i = 0; i < t.rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < t.cols; ++j) acc += t.at(i, j) * t.at(i, j);
    const double norm = std::sqrt(acc);
    for (int j = 0; j < t.cols; ++j) t.at(i, j) /= norm;
  }
}

struct MlpSpec {
  int input_dim = 0;
  int hidden_dim = 0;
  int hidden_layers = 0;
  int output_dim = 0;
  Activation activation = Activation::kRelu;

  void validate() const {
    if (hidden_layers < 1) throw ContractError("MlpSpec: hidden_layers must be >= 1");
    if (input_dim < 1 || hidden_dim < 1 || output_dim < 1)
      throw ContractError("MlpSpec: dimensions must be positive");
  }
};

/// Stack of activated fully connected layers, optionally followed by a plain
/// linear output layer. Hidden weights are He-normal, output weights
/// N(0, 0.02), biases zero.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const MlpSpec& spec, bool linear_output, Rng& rng)
      : spec_(spec), linear_output_(linear_output) {
    spec.validate();
    if (!linear_output && spec.output_dim != spec.hidden_dim)
      throw ContractError("Mlp: without an output layer the output dim is the hidden dim");
    int in = spec.input_dim;
    for (int l = 0; l < spec.hidden_layers; ++l) {
      weights_.push_back(rng.normal_matrix(in, spec.hidden_dim, std::sqrt(2.0 / in)));
      biases_.push_back(Tensor::zeros(1, spec.hidden_dim));
      in = spec.hidden_dim;
    }
    if (linear_output) {
      weights_.push_back(rng.normal_matrix(in, spec.output_dim, 0.02));
      biases_.push_back(Tensor::zeros(1, spec.output_dim));
    }
    for (auto& w : weights_) w.requires_grad = true;
    for (auto& b : biases_) b.requires_grad = true;
  }

  Val forward(Tape& t, Val x) {
    Val h = x;
    for (size_t l = 0; l < weights_.size(); ++l) {
      h = t.add_rowvec(t.matmul(h, t.leaf(weights_[l])), t.leaf(biases_[l]));
      const bool activated = l < static_cast<size_t>(spec_.hidden_layers);
      if (activated) {
        h = spec_.activation == Activation::kRelu ? t.relu(h)
                                                  : t.leaky_relu(h, kLeakyReluSlope);
      }
    }
    return h;
  }

  const MlpSpec& spec() const { return spec_; }
  std::vector<Tensor>& weights() { return weights_; }
  std::vector<Tensor>& biases() { return biases_; }

  std::vector<std::pair<std::string, Tensor*>> named_params(const std::string& prefix) {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (size_t l = 0; l < weights_.size(); ++l) {
      out.emplace_back(prefix + ".w" + std::to_string(l), &weights_[l]);
      out.emplace_back(prefix + ".b" + std::to_string(l), &biases_[l]);
    }
    return out;
  }

 private:
  MlpSpec spec_;
  bool linear_output_ = false;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

/// Conditional generator: a 4-dim learnable embedding per class is
/// concatenated with the 10-dim latent and mapped to the 2-dim data space by
/// a ReLU MLP.
class Generator {
 public:
  static constexpr int kLatentDim = 10;
  static constexpr int kEmbedDim = 4;
  static constexpr int kDataDim = 2;

  Generator() = default;
  Generator(int class_count, Rng& rng)
      : class_count_(class_count),
        class_embeddings_(rng.normal_matrix(class_count, kEmbedDim)),
        mlp_(MlpSpec{kLatentDim + kEmbedDim, 50, 3, kDataDim, Activation::kRelu},
             /*linear_output=*/true, rng) {
    class_embeddings_.requires_grad = true;
  }

  /// x_g = g(z, y); differentiable in the generator parameters.
  Val forward(Tape& t, const Tensor& z, const std::vector<int>& y) {
    if (z.cols != kLatentDim)
      throw ShapeError("Generator: latent must be n x " + std::to_string(kLatentDim) + ", got " +
                       z.shape_str());
    if (z.rows != static_cast<int>(y.size()))
      throw ShapeError("Generator: latent rows " + std::to_string(z.rows) +
                       " != label count " + std::to_string(y.size()));
    for (int c : y)
      if (c < 0 || c >= class_count_)
        throw IndexError("Generator: class id " + std::to_string(c) + " out of [0, " +
                         std::to_string(class_count_) + ")");
    Tensor zc = z;
    Val emb = t.gather_rows(t.leaf(class_embeddings_), y);
    return mlp_.forward(t, t.concat_cols(t.constant(std::move(zc)), emb));
  }

  /// Detached sample batch, convenient for evaluation.
  Tensor sample(const std::vector<int>& y, Rng& rng) {
    const Tensor z = rng.normal_matrix(static_cast<int>(y.size()), kLatentDim);
    Tape t;
    return t.value(forward(t, z, y));
  }

  int class_count() const { return class_count_; }
  Tensor& class_embeddings() { return class_embeddings_; }
  Mlp& mlp() { return mlp_; }

  std::vector<std::pair<std::string, Tensor*>> named_params() {
    auto out = mlp_.named_params("gen.mlp");
    out.emplace_back("gen.emb", &class_embeddings_);
    return out;
  }

 private:
  int class_count_ = 0;
  Tensor class_embeddings_;
  Mlp mlp_;
};

/// Shared discriminator feature extractor h: R^2 -> R^50, three leaky-ReLU
/// layers; the projection heads below play the role of the final linear
/// layer.
class FeatureNet {
 public:
  static constexpr int kFeatureDim = 50;

  FeatureNet() = default;
  explicit FeatureNet(Rng& rng)
      : mlp_(MlpSpec{2, kFeatureDim, 3, kFeatureDim, Activation::kLeakyRelu},
             /*linear_output=*/false, rng) {}

  Val forward(Tape& t, Val x) { return mlp_.forward(t, x); }

  Mlp& mlp() { return mlp_; }
  std::vector<std::pair<std::string, Tensor*>> named_params() {
    return mlp_.named_params("feat.mlp");
  }

 private:
  Mlp mlp_;
};

/// SONA head: unit direction omega for naturalness, per-class unit
/// directions omega_y for alignment on the component of h(x) orthogonal to
/// omega, plus a scalar bias on the naturalness term. Raw parameters are
/// unconstrained; normalization happens inside the forward pass so the
/// optimizer works on free variables and gradients flow through the
/// normalization.
class SonaHead {
 public:
  SonaHead() = default;
  SonaHead(int class_count, int feature_dim, Rng& rng)
      : omega_raw_(rng.normal_matrix(1, feature_dim)),
        omega_y_raw_(rng.normal_matrix(class_count, feature_dim)),
        bias_(Tensor::zeros(1, 1)) {
    // Raw directions start at unit norm: the gradient through the forward
    // normalization scales as 1/||raw||, so the raw norm sets how fast a
    // direction can rotate under a fixed learning rate.
    normalize_rows_in_place(omega_raw_);
    normalize_rows_in_place(omega_y_raw_);
    omega_raw_.requires_grad = true;
    omega_y_raw_.requires_grad = true;
    bias_.requires_grad = true;
  }

  Val omega(Tape& t) { return t.unit_normalize(t.leaf(omega_raw_)); }
  Val omega_y(Tape& t) { return t.normalize_rows(t.leaf(omega_y_raw_)); }
  Val bias(Tape& t) { return t.leaf(bias_); }

  /// f_N(x) = <omega, h> + b.
  Val naturalness(Tape& t, Val omega, Val h) {
    return t.add_scalar(t.rowdot(h, omega), t.leaf(bias_));
  }

  /// Residual of h orthogonal to omega: h - <omega, h> omega.
  Val ortho_residual(Tape& t, Val omega, Val h) {
    return t.sub(h, t.matmul(t.rowdot(h, omega), omega));
  }

  /// f_A(x, y) = <omega_y, h - <omega, h> omega>.
  Val alignment(Tape& t, Val omega, Val omega_y, Val h, const std::vector<int>& y) {
    Val dirs = t.gather_rows(omega_y, y);
    return t.row_sum(t.mul(ortho_residual(t, omega, h), dirs));
  }

  Tensor& omega_raw() { return omega_raw_; }
  Tensor& omega_y_raw() { return omega_y_raw_; }
  Tensor& bias_param() { return bias_; }

  std::vector<std::pair<std::string, Tensor*>> named_params() {
    return {{"head.omega_raw", &omega_raw_},
            {"head.omega_y_raw", &omega_y_raw_},
            {"head.bias", &bias_}};
  }

 private:
  Tensor omega_raw_;    // 1 x D
  Tensor omega_y_raw_;  // N x D
  Tensor bias_;         // 1 x 1
};

/// f(x, y) = <omega, h> + f_A(x, y) with omega and omega_y normalized inside
/// the pass. Returns (f_N, f_A) as n x 1 columns.
inline std::pair<Val, Val> sona_forward(Tape& t, SonaHead& head, FeatureNet& feat, Val x,
                                        const std::vector<int>& y) {
  Val h = feat.forward(t, x);
  Val omega = head.omega(t);
  Val f_n = head.naturalness(t, omega, h);
  Val f_a = head.alignment(t, omega, head.omega_y(t), h, y);
  return {f_n, f_a};
}

/// Projection-discriminator head: f(x, y) = <w_y + w, h(x)> + b, no norm
/// constraints.
class PdganHead {
 public:
  PdganHead() = default;
  PdganHead(int class_count, int feature_dim, Rng& rng)
      : w_(rng.normal_matrix(1, feature_dim, 0.02)),
        w_y_(rng.normal_matrix(class_count, feature_dim)),
        bias_(Tensor::zeros(1, 1)) {
    w_.requires_grad = true;
    w_y_.requires_grad = true;
    bias_.requires_grad = true;
  }

  Val forward(Tape& t, FeatureNet& feat, Val x, const std::vector<int>& y) {
    Val h = feat.forward(t, x);
    Val shared = t.rowdot(h, t.leaf(w_));
    Val per_class = t.row_sum(t.mul(h, t.gather_rows(t.leaf(w_y_), y)));
    return t.add_scalar(t.add(shared, per_class), t.leaf(bias_));
  }

  Tensor& w() { return w_; }
  Tensor& w_y() { return w_y_; }
  Tensor& bias_param() { return bias_; }

  std::vector<std::pair<std::string, Tensor*>> named_params() {
    return {{"pd.w", &w_}, {"pd.w_y", &w_y_}, {"pd.bias", &bias_}};
  }

 private:
  Tensor w_;    // 1 x D
  Tensor w_y_;  // N x D
  Tensor bias_;
};

inline Val pdgan_forward(Tape& t, PdganHead& head, FeatureNet& feat, Val x,
                         const std::vector<int>& y) {
  return head.forward(t, feat, x, y);
}

}  // namespace sona
