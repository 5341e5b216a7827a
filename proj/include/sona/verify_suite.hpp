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

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "sona/assignment.hpp"
#include "sona/checkpoint.hpp"
#include "sona/finite_diff.hpp"
#include "sona/metrics.hpp"
#include "sona/mog.hpp"
#include "sona/nets.hpp"
#include "sona/objectives.hpp"
#include "sona/prop_oracles.hpp"

namespace sona {

struct VerifyCheck {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

namespace verify_detail {

inline double brute_force_min_cost(const AssignmentProblem& p) {
  std::vector<int> perm(p.n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < p.n; ++i) c += p.at(i, perm[i]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace verify_detail

/// The release-gate property battery: tape gradients against central finite
/// differences for every public loss, the Prop. 1 / Prop. 4 discrete-space
/// oracles, and assignment-solver exactness. Deterministic.
inline std::vector<VerifyCheck> run_verification() {
  std::vector<VerifyCheck> checks;
  const auto add = [&checks](const std::string& name, double measured, double tol) {
    checks.push_back({name, measured, tol, measured < tol});
  };

  // ---- gradient checks --------------------------------------------------
  {
    Rng rng(2024);
    const int classes = 3;
    FeatureNet feat(rng);
    SonaHead head(classes, FeatureNet::kFeatureDim, rng);
    Generator gen(classes, rng);
    // Healthy output scale keeps probes away from activation kinks.
    gen.mlp().weights().back() = rng.normal_matrix(50, 2, 0.5);
    gen.mlp().weights().back().requires_grad = true;
    PdganHead pd(classes, FeatureNet::kFeatureDim, rng);
    WeightTriplet weights;
    weights.raw_btc().values[0] = 0.3;

    MogSpec spec;
    spec.class_count = classes;
    BatchTriple batch;
    auto joint = sample_joint(spec, rng, 5);
    batch.x_data = joint.x;
    batch.y = joint.y;
    batch.x_neg = make_negatives(batch.x_data, rng);
    batch.x_gen = gen.sample(batch.y, rng);
    const Tensor z = rng.normal_matrix(5, Generator::kLatentDim);

    ParamRefs disc = feat.named_params();
    for (auto& p : head.named_params()) disc.push_back(p);
    for (auto& p : weights.named_params()) disc.push_back(p);
    ParamRefs all = disc;
    for (auto& p : gen.named_params()) all.push_back(p);
    ParamRefs pd_params = feat.named_params();
    for (auto& p : pd.named_params()) pd_params.push_back(p);
    ParamRefs pd_gen = pd_params;
    for (auto& p : gen.named_params()) pd_gen.push_back(p);

    Tensor table = rng.normal_matrix(4, classes);
    table.requires_grad = true;

    const double tol = 1e-4;
    add("grad/v_san",
        check_gradients(
            [&](Tape& t) {
              auto s = weights.effective(t);
              return v_san(t, feat, head, t.constant(batch.x_data), t.constant(batch.x_gen),
                           s.san);
            },
            disc)
            .max_rel_err,
        tol);
    add("grad/j_san",
        check_gradients([&](Tape& t) { return j_san(t, feat, head, gen.forward(t, z, batch.y)); },
                        all)
            .max_rel_err,
        tol);
    add("grad/v_bt_cond",
        check_gradients(
            [&](Tape& t) {
              auto s = weights.effective(t);
              return v_bt_cond(t, feat, head, batch, s.btc);
            },
            disc)
            .max_rel_err,
        tol);
    add("grad/v_bt_mm",
        check_gradients(
            [&](Tape& t) {
              auto s = weights.effective(t);
              return v_bt_mm(t, feat, head, batch, s.btm);
            },
            disc)
            .max_rel_err,
        tol);
    add("grad/j_bt_cond",
        check_gradients(
            [&](Tape& t) {
              return j_bt_cond(t, feat, head, gen.forward(t, z, batch.y),
                               t.constant(batch.x_data), batch.y);
            },
            all)
            .max_rel_err,
        tol);
    add("grad/v_ce",
        check_gradients([&](Tape& t) { return v_ce(t, t.leaf(table), {0, 2, 1, 2}, 0.7); },
                        {{"table", &table}})
            .max_rel_err,
        tol);
    add("grad/gan_ns_max",
        check_gradients(
            [&](Tape& t) {
              Val f_d = pdgan_forward(t, pd, feat, t.constant(batch.x_data), batch.y);
              Val f_g = pdgan_forward(t, pd, feat, t.constant(batch.x_gen), batch.y);
              return gan_nonsaturating(t, f_d, f_g).max_loss;
            },
            pd_params)
            .max_rel_err,
        tol);
    add("grad/gan_ns_min",
        check_gradients(
            [&](Tape& t) {
              Val f_d = pdgan_forward(t, pd, feat, t.constant(batch.x_data), batch.y);
              Val f_g = pdgan_forward(t, pd, feat, gen.forward(t, z, batch.y), batch.y);
              return gan_nonsaturating(t, f_d, f_g).min_loss;
            },
            pd_gen)
            .max_rel_err,
        tol);
    add("grad/total_discriminator",
        check_gradients(
            [&](Tape& t) {
              return total_discriminator_loss(t, feat, head, weights, batch).objective;
            },
            disc)
            .max_rel_err,
        tol);
    add("grad/total_generator",
        check_gradients(
            [&](Tape& t) {
              Val x_g = gen.forward(t, z, batch.y);
              return total_generator_loss(t, feat, head, x_g, t.constant(batch.x_data), batch.y)
                  .objective;
            },
            all)
            .max_rel_err,
        tol);
  }

  // ---- proposition oracles ------------------------------------------------
  {
    const DiscreteJoint canonical =
        DiscreteJoint::from_table(Tensor(2, 2, {0.4, 0.1, 0.1, 0.4}));
    add("prop4/canonical_2x2", verify_prop4(canonical), 1e-3);
    add("prop1/canonical_2x2", verify_prop1(canonical), 1e-3);

    Rng rng(7);
    double worst4 = 0.0, worst1 = 0.0;
    for (int k = 0; k < 10; ++k) {
      const int nx = 2 + rng.uniform_int(3);
      const int ny = 2 + rng.uniform_int(2);
      worst4 = std::max(worst4, verify_prop4(DiscreteJoint::random(rng, nx, ny)));
      worst1 = std::max(worst1, verify_prop1(DiscreteJoint::random_uniform_y(rng, nx, ny)));
    }
    add("prop4/random_tables", worst4, 1e-3);
    add("prop1/random_tables", worst1, 1e-3);
  }

  // ---- assignment exactness ----------------------------------------------
  {
    Rng rng(11);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      const int n = 1 + rng.uniform_int(6);
      AssignmentProblem p;
      p.n = n;
      p.cost.resize(static_cast<size_t>(n) * n);
      for (auto& c : p.cost) c = rng.uniform01();
      const double expected = verify_detail::brute_force_min_cost(p);
      worst = std::max(worst, std::fabs(solve_assignment(p).total_cost - expected));
    }
    add("ot/brute_force_n_le_6", worst, 1e-12);

    double axiom_worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const int n = 3 + rng.uniform_int(10);
      Tensor a = rng.normal_matrix(n, 2), b = rng.normal_matrix(n, 2), c = rng.normal_matrix(n, 2);
      axiom_worst = std::max(axiom_worst, w2(a, a));
      axiom_worst = std::max(axiom_worst, std::fabs(w2(a, b) - w2(b, a)));
      axiom_worst = std::max(axiom_worst, w2(a, c) - (w2(a, b) + w2(b, c)));
      Tensor as = a, bs = b;
      for (int i = 0; i < n; ++i) {
        as.at(i, 0) += 0.7;
        as.at(i, 1) -= 1.3;
        bs.at(i, 0) += 0.7;
        bs.at(i, 1) -= 1.3;
      }
      axiom_worst = std::max(axiom_worst, std::fabs(w2(as, bs) - w2(a, b)));
    }
    add("ot/metric_axioms", axiom_worst, 1e-9);
  }

  return checks;
}

inline bool print_verification(const std::vector<VerifyCheck>& checks, std::ostream& out) {
  bool all = true;
  for (const auto& c : checks) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "[%s] %-28s measured %.3e  tolerance %.0e\n",
                  c.pass ? "PASS" : "FAIL", c.name.c_str(), c.measured, c.tolerance);
    out << buf;
    all = all && c.pass;
  }
  out << (all ? "verification passed" : "verification FAILED") << "\n";
  return all;
}

}  // namespace sona
