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
#include <map>

#include "sona/trainer.hpp"

using namespace sona;

namespace {

TrainConfig small_config(Method m, int classes, int iters, uint64_t seed) {
  TrainConfig cfg;
  cfg.method = m;
  cfg.mog.class_count = classes;
  cfg.batch = 64;
  cfg.iters = iters;
  cfg.eval_every = 10;
  cfg.eval_samples = 128;
  cfg.seed = seed;
  return cfg;
}

std::map<std::string, std::vector<double>> values_of(const ParamRefs& refs) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& [name, p] : refs) out[name] = p->values;
  return out;
}

}  // namespace

TEST_CASE("routing: a discriminator step leaves the generator bit-identical") {
  for (Method m : {Method::kSona, Method::kSonaNoMm, Method::kPdgan, Method::kSanOnly}) {
    Trainer tr(small_config(m, 3, 0, 5));
    const auto before = values_of(tr.generator_params());
    const auto disc_before = values_of(tr.trained_discriminator_params());
    tr.discriminator_step();
    const auto after = values_of(tr.generator_params());
    CHECK(before == after);
    CHECK(values_of(tr.trained_discriminator_params()) != disc_before);
  }
}

TEST_CASE("routing: a generator step leaves the discriminator bit-identical") {
  for (Method m : {Method::kSona, Method::kSonaNoMm, Method::kPdgan, Method::kSanOnly}) {
    Trainer tr(small_config(m, 3, 0, 6));
    const auto disc_before = values_of(tr.discriminator_params());
    const auto gen_before = values_of(tr.generator_params());
    tr.generator_step();
    CHECK(values_of(tr.discriminator_params()) == disc_before);
    CHECK(values_of(tr.generator_params()) != gen_before);
  }
}

TEST_CASE("routing: omega_y receives no gradient from v_san") {
  Trainer tr(small_config(Method::kSona, 4, 0, 7));
  auto& head = tr.sona_head();
  auto& feat = tr.feature_net();
  Rng rng(9);
  const auto batch = sample_joint(tr.config().mog, rng, 32);
  const Tensor fake = rng.normal_matrix(32, 2);

  head.omega_y_raw().zero_grad();
  Tape t;
  Val loss = v_san(t, feat, head, t.constant(batch.x), t.constant(fake), 1.0);
  t.backward(loss);
  // The alignment directions never enter the graph, so they cannot receive
  // a contribution at all.
  CHECK(!head.omega_y_raw().grad_allocated());
}

TEST_CASE("train: zero iterations returns the initial checkpoint") {
  Trainer tr(small_config(Method::kSona, 2, 0, 8));
  const auto res = tr.train();
  REQUIRE(res.history.size() == 1);
  CHECK(res.history[0].iteration == 0);
  CHECK(res.history[0].losses.empty());
  CHECK(std::isfinite(res.best.w2));
  CHECK(res.best.iteration == 0);
  CHECK(res.best.params.count("gen.emb") == 1);
}

TEST_CASE("train: identical config and seed give identical histories") {
  for (Method m : {Method::kSona, Method::kPdgan}) {
    Trainer a(small_config(m, 3, 25, 11));
    Trainer b(small_config(m, 3, 25, 11));
    const auto ra = a.train();
    const auto rb = b.train();
    REQUIRE(ra.history.size() == rb.history.size());
    for (size_t i = 0; i < ra.history.size(); ++i) {
      CHECK(ra.history[i].iteration == rb.history[i].iteration);
      CHECK(ra.history[i].w2 == rb.history[i].w2);
      CHECK(ra.history[i].cw2_mean == rb.history[i].cw2_mean);
      CHECK(ra.history[i].losses == rb.history[i].losses);
      CHECK(ra.history[i].s == rb.history[i].s);
    }
    for (const auto& [name, t] : ra.best.params) {
      const auto& other = rb.best.params.at(name);
      CHECK(t.values == other.values);
    }
  }
}

TEST_CASE("train: different seeds diverge") {
  Trainer a(small_config(Method::kSona, 3, 5, 1));
  Trainer b(small_config(Method::kSona, 3, 5, 2));
  const auto ra = a.train();
  const auto rb = b.train();
  CHECK(ra.history.back().w2 != rb.history.back().w2);
}

TEST_CASE("train: 500-iteration smoke run keeps every structural invariant") {
  auto cfg = small_config(Method::kSona, 4, 500, 13);
  cfg.eval_every = 100;
  Trainer tr(cfg);
  Rng probe_rng(99);
  const auto probe = sample_joint(cfg.mog, probe_rng, 16);

  int checked = 0;
  const auto res = tr.train([&](Trainer& t, int iter) {
    // Weight triple on the unit sphere.
    const auto s = t.effective_weight_values();
    REQUIRE(s.size() == 3);
    double q = 0.0;
    for (double v : s) {
      q += v * v;
      REQUIRE(v > 0.0);
    }
    REQUIRE(std::fabs(q - 1.0) < 1e-12);

    // Unit directions and the projector identity.
    Tape tape;
    Val omega = t.sona_head().omega(tape);
    double n2 = 0.0;
    for (double v : tape.value(omega).values) n2 += v * v;
    REQUIRE(std::fabs(std::sqrt(n2) - 1.0) < 1e-12);

    const Tensor& oy = tape.value(t.sona_head().omega_y(tape));
    for (int c = 0; c < oy.rows; ++c) {
      double r2 = 0.0;
      for (int j = 0; j < oy.cols; ++j) r2 += oy.at(c, j) * oy.at(c, j);
      REQUIRE(std::fabs(std::sqrt(r2) - 1.0) < 1e-12);
    }

    if (iter % 50 == 0) {
      Val h = t.feature_net().forward(tape, tape.constant(probe.x));
      Val resid = t.sona_head().ortho_residual(tape, omega, h);
      for (double v : tape.value(tape.rowdot(resid, omega)).values)
        REQUIRE(std::fabs(v) < 1e-10);
    }
    ++checked;
  });
  CHECK(checked == 500);
  for (const auto& rec : res.history) {
    CHECK(std::isfinite(rec.w2));
    for (const auto& [k, v] : rec.losses) CHECK(std::isfinite(v));
  }
}

TEST_CASE("checkpoint: JSON round trip restores bit-identical parameters and W2") {
  auto cfg = small_config(Method::kSona, 3, 8, 17);
  Trainer tr(cfg);
  const auto res = tr.train();

  const auto j = checkpoint_to_json(res.best, "cafebabe");
  const std::string text = j.dump();
  std::string hash;
  const Checkpoint loaded = checkpoint_from_json(nlohmann::json::parse(text), &hash);
  CHECK(hash == "cafebabe");
  CHECK(loaded.iteration == res.best.iteration);
  CHECK(loaded.w2 == res.best.w2);
  for (const auto& [name, t] : res.best.params) {
    const auto& other = loaded.params.at(name);
    REQUIRE(other.rows == t.rows);
    REQUIRE(other.cols == t.cols);
    CHECK(other.values == t.values);
  }

  // Restoring into a fresh trainer reproduces the same evaluation.
  Trainer fresh(cfg);
  restore_params(loaded, fresh.all_params());
  Rng ea = Rng::derive(123, 9), eb = Rng::derive(123, 9);
  std::vector<int> y(256);
  Rng yr(5);
  for (auto& v : y) v = yr.uniform_int(3);
  const Tensor sa = tr.model_sample(y, ea);
  Trainer tr2(cfg);
  restore_params(loaded, tr2.all_params());
  const Tensor sb = tr2.model_sample(y, eb);
  // tr still holds end-of-training params, so restore before comparing.
  restore_params(loaded, tr.all_params());
  Rng ec = Rng::derive(123, 9);
  const Tensor sc = tr.model_sample(y, ec);
  CHECK(sb.values == sc.values);
}

TEST_CASE("train: poisoned parameters abort with a numeric error naming the step") {
  auto cfg = small_config(Method::kSona, 2, 3, 19);
  Trainer tr(cfg);
  tr.sona_head().bias_param().values[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    tr.train();
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("iteration") != std::string::npos);
    CHECK(msg.find("=") != std::string::npos);  // loss breakdown present
  }
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.batch = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.update_ratio = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.iters = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(method_from_string("wgan"), ConfigError);
  CHECK(method_from_string("sona_no_mm") == Method::kSonaNoMm);
}
