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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sona/finite_diff.hpp"
#include "sona/mog.hpp"
#include "sona/prop_oracles.hpp"
#include "sona/verify_suite.hpp"

using namespace sona;

TEST_CASE("finite_diff_grad: polynomial, constant and contract cases") {
  Tensor x = Tensor::scalar(3.0);
  auto fd = finite_diff_grad([&]() { return x.values[0] * x.values[0]; }, x, 1e-5);
  CHECK(std::fabs(fd[0] - 6.0) < 1e-7);

  Tensor y(2, 2, {1, 2, 3, 4});
  auto fd2 = finite_diff_grad([]() { return 42.0; }, y, 1e-5);
  for (double g : fd2) CHECK(g == 0.0);

  Tensor z = Tensor::scalar(0.0);
  CHECK_THROWS_AS(
      finite_diff_grad([]() { return std::numeric_limits<double>::quiet_NaN(); }, z, 1e-5),
      ContractError);
  CHECK_THROWS_AS(finite_diff_grad([]() { return 0.0; }, z, 0.0), ContractError);
}

TEST_CASE("check_gradients flags a 10% scale bug and a sign flip") {
  Rng rng(1);
  Tensor x = rng.normal_matrix(2, 3);
  x.requires_grad = true;

  // The reference pass (first call) and the probe passes (later calls)
  // compute different functions, standing in for a broken backward rule.
  int calls = 0;
  auto scaled = [&](Tape& t) {
    ++calls;
    Val q = t.sum(t.mul(t.leaf(x), t.leaf(x)));
    return calls == 1 ? q : t.scale(q, 1.1);
  };
  CHECK(check_gradients(scaled, {{"x", &x}}).max_rel_err > 1e-2);

  calls = 0;
  auto flipped = [&](Tape& t) {
    ++calls;
    Val q = t.sum(t.mul(t.leaf(x), t.leaf(x)));
    return calls == 1 ? q : t.neg(q);
  };
  CHECK(check_gradients(flipped, {{"x", &x}}).max_rel_err > 1.0);
}

TEST_CASE("discrete joint validation") {
  CHECK_THROWS_AS(DiscreteJoint::from_table(Tensor(2, 2, {0.5, 0.5, 0.5, 0.5})), ContractError);
  CHECK_THROWS_AS(DiscreteJoint::from_table(Tensor(2, 2, {1.0, 0.0, 0.0, 0.0})), ContractError);
  CHECK_THROWS_AS(DiscreteJoint::from_table(Tensor(2, 2, {1.2, -0.2, 0.0, 0.0})), ContractError);
  const auto ok = DiscreteJoint::from_table(Tensor(2, 2, {0.4, 0.1, 0.1, 0.4}));
  CHECK(ok.marginal_x(0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("prop4: canonical table recovers the ln 4 log-gap structure") {
  // log gap differences for [[0.4, 0.1], [0.1, 0.4]]:
  // logGap(x1,y1) - logGap(x2,y1) = ln(0.8/0.5) - ln(0.2/0.5) = ln 4.
  CHECK(std::log(0.8 / 0.5) - std::log(0.2 / 0.5) == doctest::Approx(std::log(4.0)));
  const auto joint = DiscreteJoint::from_table(Tensor(2, 2, {0.4, 0.1, 0.1, 0.4}));
  CHECK(verify_prop4(joint) < 1e-3);
}

TEST_CASE("prop4: independent and uniform joints have no gap") {
  // p(x, y) = p(x) p(y) with non-uniform marginals.
  const double px[3] = {0.5, 0.3, 0.2};
  const double py[2] = {0.7, 0.3};
  Tensor t(3, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) t.at(i, j) = px[i] * py[j];
  t.values.back() += 1.0 - (px[0] * py[0] + px[0] * py[1] + px[1] * py[0] + px[1] * py[1] +
                            px[2] * py[0] + px[2] * py[1]);
  CHECK(verify_prop4(DiscreteJoint::from_table(t)) < 1e-3);

  Tensor u = Tensor::full(2, 3, 1.0 / 6.0);
  CHECK(verify_prop4(DiscreteJoint::from_table(u)) < 1e-3);
}

TEST_CASE("prop1: canonical table recovers log p(y|x) differences") {
  CHECK(std::log(0.8 / 0.2) == doctest::Approx(std::log(4.0)));
  const auto joint = DiscreteJoint::from_table(Tensor(2, 2, {0.4, 0.1, 0.1, 0.4}));
  CHECK(verify_prop1(joint) < 1e-3);
}

TEST_CASE("prop1: independence, column swap and the uniform-p(y) contract") {
  Tensor u = Tensor::full(3, 2, 1.0 / 6.0);
  CHECK(verify_prop1(DiscreteJoint::from_table(u)) < 1e-3);

  const auto joint = DiscreteJoint::from_table(Tensor(2, 2, {0.4, 0.1, 0.1, 0.4}));
  const auto swapped = DiscreteJoint::from_table(Tensor(2, 2, {0.1, 0.4, 0.4, 0.1}));
  CHECK(verify_prop1(swapped) < 1e-3);

  const auto skewed = DiscreteJoint::from_table(Tensor(2, 2, {0.6, 0.1, 0.1, 0.2}));
  CHECK_THROWS_AS(verify_prop1(skewed), ContractError);
}

TEST_CASE("prop oracles: random tables at the acceptance tolerance") {
  Rng rng(5);
  for (int k = 0; k < 4; ++k) {
    CHECK(verify_prop4(DiscreteJoint::random(rng, 2 + k % 3, 2 + k % 2)) < 1e-3);
    CHECK(verify_prop1(DiscreteJoint::random_uniform_y(rng, 2 + k % 3, 2 + k % 2)) < 1e-3);
  }
}

TEST_CASE("ascent diagnostics: an impossible budget raises") {
  const auto joint = DiscreteJoint::from_table(Tensor(2, 2, {0.4, 0.1, 0.1, 0.4}));
  AscentConfig cfg;
  cfg.steps = 1;
  cfg.grad_tol = 1e-15;
  CHECK_THROWS_AS(verify_prop4(joint, cfg), NumericError);
}

TEST_CASE("finite differences match autodiff on the total discriminator loss") {
  Rng rng(6);
  FeatureNet feat(rng);
  SonaHead head(3, FeatureNet::kFeatureDim, rng);
  Generator gen(3, rng);
  WeightTriplet weights;
  MogSpec spec;
  spec.class_count = 3;
  BatchTriple batch;
  auto joint = sample_joint(spec, rng, 5);
  batch.x_data = joint.x;
  batch.y = joint.y;
  batch.x_neg = make_negatives(batch.x_data, rng);
  batch.x_gen = gen.sample(batch.y, rng);

  ParamRefs params = feat.named_params();
  for (auto& p : head.named_params()) params.push_back(p);
  for (auto& p : weights.named_params()) params.push_back(p);
  const auto res = check_gradients(
      [&](Tape& t) {
        return total_discriminator_loss(t, feat, head, weights, batch).objective;
      },
      params);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("verification report prints pass/fail lines and names the failure") {
  std::vector<VerifyCheck> checks = {{"grad/logsigmoid", 0.5, 1e-4, false},
                                     {"ot/brute_force", 0.0, 1e-12, true}};
  std::ostringstream out;
  CHECK(!print_verification(checks, out));
  CHECK(out.str().find("[FAIL] grad/logsigmoid") != std::string::npos);
  CHECK(out.str().find("[PASS] ot/brute_force") != std::string::npos);

  std::ostringstream ok;
  CHECK(print_verification({{"x", 0.0, 1.0, true}}, ok));
}
