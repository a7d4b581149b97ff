// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "hcml/data.hpp"
#include "hcml/trainer.hpp"

using namespace hcml;

namespace {

SynthSpec tiny_spec() {
  SynthSpec spec;
  spec.n_identities = 6;
  spec.samples_per_modality = 6;
  spec.h = 4;
  spec.w = 2;
  spec.c = 3;
  spec.noise_scale = 0.2;
  spec.seed = 5;
  return spec;
}

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.p = 2;
  cfg.h = 4;
  cfg.w = 2;
  cfg.c = 3;
  cfg.branch_hidden = 6;
  cfg.embed_dim = 4;
  return cfg;
}

TrainConfig tiny_train() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batches_per_epoch = 4;
  cfg.l = 3;
  cfg.t = 2;
  cfg.lr_initial = 1e-3;
  cfg.lr_after_decay = 1e-4;
  cfg.decay_epoch = 2;
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST_CASE("sgd_momentum_step worked examples") {
  Vec param{1.0}, velocity{0.0};
  sgd_momentum_step(param, velocity, {1.0}, 0.1, 0.9);
  CHECK(param[0] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(velocity[0] == doctest::Approx(-0.1).epsilon(1e-12));

  // Zero gradient: the update is pure momentum.
  Vec p2{0.0}, v2{0.5};
  sgd_momentum_step(p2, v2, {0.0}, 0.1, 0.9);
  CHECK(p2[0] == doctest::Approx(0.45).epsilon(1e-12));
  CHECK(v2[0] == doctest::Approx(0.45).epsilon(1e-12));

  CHECK_THROWS_AS(sgd_momentum_step(p2, v2, {0.0, 0.0}, 0.1, 0.9), std::invalid_argument);
}

TEST_CASE("train history shape, decomposition and lr schedule") {
  const Dataset ds = generate(tiny_spec());
  const TrainConfig tcfg = tiny_train();
  const TrainResult r = train(tiny_model(), tcfg, ds);

  CHECK(r.history.steps.size() ==
        static_cast<std::size_t>(tcfg.epochs * tcfg.batches_per_epoch));
  CHECK(r.history.epochs.size() == static_cast<std::size_t>(tcfg.epochs));

  for (const auto& s : r.history.steps) {
    CHECK(s.total == s.ce + tcfg.hc.lambda * s.hc);  // exact decomposition
    const double expected_lr =
        s.step < tcfg.decay_epoch * tcfg.batches_per_epoch ? tcfg.lr_initial
                                                           : tcfg.lr_after_decay;
    CHECK(s.lr == expected_lr);
  }
}

TEST_CASE("train is bit-deterministic given the seed") {
  const Dataset ds = generate(tiny_spec());
  const TrainResult a = train(tiny_model(), tiny_train(), ds);
  const TrainResult b = train(tiny_model(), tiny_train(), ds);
  REQUIRE(a.history.steps.size() == b.history.steps.size());
  for (std::size_t i = 0; i < a.history.steps.size(); ++i) {
    CHECK(a.history.steps[i].ce == b.history.steps[i].ce);
    CHECK(a.history.steps[i].hc == b.history.steps[i].hc);
    CHECK(a.history.steps[i].total == b.history.steps[i].total);
  }
  bool params_equal = true;
  std::vector<const Vec*> pa, pb;
  a.params.for_each([&](const Vec& v) { pa.push_back(&v); });
  b.params.for_each([&](const Vec& v) { pb.push_back(&v); });
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (*pa[i] != *pb[i]) params_equal = false;
  CHECK(params_equal);
}

TEST_CASE("lambda=0 training reduces to the CE-only baseline") {
  const Dataset ds = generate(tiny_spec());
  TrainConfig tcfg = tiny_train();
  tcfg.hc.lambda = 0.0;
  const TrainResult r = train(tiny_model(), tcfg, ds);
  for (const auto& s : r.history.steps) CHECK(s.total == s.ce);
}

TEST_CASE("strong constraint and center loss variants run") {
  const Dataset ds = generate(tiny_spec());
  TrainConfig tcfg = tiny_train();
  tcfg.epochs = 1;
  tcfg.decay_epoch = 1;

  tcfg.hc.constraint = Constraint::Strong;
  CHECK_NOTHROW(train(tiny_model(), tcfg, ds));

  tcfg.hc.constraint = Constraint::Weak;
  tcfg.loss_kind = LossKind::Center;
  const TrainResult r = train(tiny_model(), tcfg, ds);
  for (const auto& s : r.history.steps) CHECK(s.hc >= 0.0);
}

TEST_CASE("legacy sampler variant runs with CE only") {
  const Dataset ds = generate(tiny_spec());
  TrainConfig tcfg = tiny_train();
  tcfg.sampler_kind = SamplerKind::Legacy;
  tcfg.hc.lambda = 0.0;
  CHECK_NOTHROW(train(tiny_model(), tcfg, ds));
}

TEST_CASE("center_distance_probe basics") {
  ModelConfig mcfg = tiny_model();
  mcfg.n_classes = 6;
  const ModelParams params = init_params(mcfg, 3);

  // Identical feature sets per modality collapse the centers.
  Dataset heldout;
  heldout.h = mcfg.h;
  heldout.w = mcfg.w;
  heldout.c = mcfg.c;
  const std::size_t fs = heldout.feature_size();
  for (int identity = 0; identity < 2; ++identity)
    for (int modality : {1, 2}) {
      Sample s;
      s.sample_id = identity * 2 + modality;
      s.identity = identity;
      s.modality = modality;
      Vec fm(fs);
      for (std::size_t i = 0; i < fs; ++i) fm[i] = 0.1 * static_cast<double>(i + identity);
      s.feature_map = fm;
      heldout.samples.push_back(s);
    }
  // Same input in both modalities still passes through different branches, so
  // force the two branches identical for this check.
  ModelParams tied = params;
  tied.branch_w[1] = tied.branch_w[0];
  tied.branch_b[1] = tied.branch_b[0];
  CHECK(center_distance_probe(tied, mcfg, heldout) == doctest::Approx(0.0).epsilon(1e-12));

  // Order invariance.
  Dataset shuffled = heldout;
  std::swap(shuffled.samples[0], shuffled.samples[3]);
  CHECK(center_distance_probe(params, mcfg, heldout) ==
        doctest::Approx(center_distance_probe(params, mcfg, shuffled)).epsilon(1e-12));
}

TEST_CASE("divergent training aborts with a diagnostic") {
  const Dataset ds = generate(tiny_spec());
  TrainConfig tcfg = tiny_train();
  tcfg.lr_initial = 1e14;
  tcfg.lr_after_decay = 1e14;
  tcfg.epochs = 3;
  tcfg.decay_epoch = 3;
  CHECK_THROWS_AS(train(tiny_model(), tcfg, ds), std::runtime_error);
}
