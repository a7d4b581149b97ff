// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <random>

#include "hcml/losses.hpp"
#include "oracles.hpp"

using namespace hcml;

namespace {

// Random batch with every class present in both modalities.
LabeledFeatures random_batch(std::mt19937_64& rng, int n_classes = 3, int per_modality = 3,
                             std::size_t dim = 4) {
  LabeledFeatures batch;
  for (int cls = 0; cls < n_classes; ++cls) {
    for (int modality : {1, 2}) {
      for (int k = 0; k < per_modality; ++k) {
        batch.features.push_back(oracle::random_vec(dim, rng, -2.0, 2.0));
        batch.labels.push_back(cls);
        batch.modalities.push_back(modality);
      }
    }
  }
  return batch;
}

const LabeledFeatures kSpecBatch{
    {{1.0, 0.0}, {3.0, 0.0}, {0.0, 0.0}, {0.0, 2.0}},
    {0, 0, 0, 0},
    {1, 1, 2, 2},
};

// Flattens batch features, applies f on the unflattened copy; for FD checks.
double on_flat(const LabeledFeatures& proto, const Vec& flat,
               const std::function<double(const LabeledFeatures&)>& f) {
  LabeledFeatures b = proto;
  std::size_t pos = 0;
  for (auto& feat : b.features)
    for (double& x : feat) x = flat[pos++];
  return f(b);
}

Vec flatten(const LabeledFeatures& b) {
  Vec flat;
  for (const auto& f : b.features) flat.insert(flat.end(), f.begin(), f.end());
  return flat;
}

Vec flatten(const std::vector<Vec>& grads) {
  Vec flat;
  for (const auto& g : grads) flat.insert(flat.end(), g.begin(), g.end());
  return flat;
}

}  // namespace

TEST_CASE("cross_entropy worked examples") {
  {
    const auto r = cross_entropy({{0.0, 0.0}}, {0});
    CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-10));
  }
  {
    const auto r = cross_entropy({{std::log(3.0), 0.0}}, {0});
    CHECK(r.loss == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-10));
    CHECK(r.logit_grads[0][0] == doctest::Approx(-0.25).epsilon(1e-10));
    CHECK(r.logit_grads[0][1] == doctest::Approx(0.25).epsilon(1e-10));
  }
  CHECK_THROWS_AS(cross_entropy({{0.0, 0.0}}, {2}), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy({{0.0, 0.0}}, {-1}), std::invalid_argument);
}

TEST_CASE("cross_entropy gradient matches finite differences") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec> logits;
    std::vector<int> labels;
    std::uniform_int_distribution<int> lab(0, 3);
    for (int i = 0; i < 5; ++i) {
      logits.push_back(oracle::random_vec(4, rng));
      labels.push_back(lab(rng));
    }
    const auto r = cross_entropy(logits, labels);
    Vec flat, analytic;
    for (const auto& l : logits) flat.insert(flat.end(), l.begin(), l.end());
    analytic = flatten(r.logit_grads);
    const auto f = [&](const Vec& x) {
      std::vector<Vec> ls(logits.size(), Vec(4));
      for (std::size_t i = 0; i < ls.size(); ++i)
        for (int k = 0; k < 4; ++k) ls[i][static_cast<std::size_t>(k)] = x[i * 4 + k];
      return cross_entropy(ls, labels).loss;
    };
    CHECK(oracle::max_grad_rel_err(f, flat, analytic) < 1e-6);
  }
}

TEST_CASE("modality_centers worked examples") {
  const auto c = modality_centers(kSpecBatch, 0);
  CHECK(c.c1 == Vec{2.0, 0.0});
  CHECK(c.c2 == Vec{0.0, 1.0});
  CHECK(c.m == 2);
  CHECK(c.n == 2);

  LabeledFeatures single{{{1.0, 2.0}, {3.0, 4.0}}, {7, 7}, {1, 2}};
  const auto cs = modality_centers(single, 7);
  CHECK(cs.c1 == Vec{1.0, 2.0});
  CHECK(cs.c2 == Vec{3.0, 4.0});

  LabeledFeatures missing{{{1.0, 2.0}}, {0}, {1}};
  CHECK_THROWS_AS(modality_centers(missing, 0), std::invalid_argument);
}

TEST_CASE("hc_loss worked examples") {
  HcConfig cfg;
  CHECK(hc_loss(kSpecBatch, cfg) == doctest::Approx(5.0).epsilon(1e-10));

  cfg.margin_alpha = 6.0;
  CHECK(hc_loss(kSpecBatch, cfg) == 0.0);

  LabeledFeatures coincident{{{1.0, 1.0}, {1.0, 1.0}}, {0, 0}, {1, 2}};
  cfg.margin_alpha = 0.0;
  CHECK(hc_loss(coincident, cfg) == 0.0);
  cfg.metric = Metric::Cosine;
  CHECK(hc_loss(coincident, cfg) == doctest::Approx(0.0).epsilon(1e-12));

  LabeledFeatures orthogonal{{{1.0, 0.0}, {0.0, 1.0}}, {0, 0}, {1, 2}};
  CHECK(hc_loss(orthogonal, cfg) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("hc_loss_gradient worked example") {
  HcConfig cfg;
  const auto grads = hc_loss_gradient(kSpecBatch, cfg);
  for (int i : {0, 1}) {
    CHECK(grads[static_cast<std::size_t>(i)][0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(grads[static_cast<std::size_t>(i)][1] == doctest::Approx(-1.0).epsilon(1e-10));
  }
  for (int i : {2, 3}) {
    CHECK(grads[static_cast<std::size_t>(i)][0] == doctest::Approx(-2.0).epsilon(1e-10));
    CHECK(grads[static_cast<std::size_t>(i)][1] == doctest::Approx(1.0).epsilon(1e-10));
  }

  LabeledFeatures coincident{{{1.0, 1.0}, {1.0, 1.0}}, {0, 0}, {1, 2}};
  for (const auto& g : hc_loss_gradient(coincident, cfg))
    for (double x : g) CHECK(x == 0.0);
}

TEST_CASE("hc_loss_gradient matches finite differences for both metrics and margins") {
  std::mt19937_64 rng(13);
  for (Metric metric : {Metric::SquaredEuclidean, Metric::Cosine}) {
    for (double alpha : {0.0, 0.3}) {
      for (int trial = 0; trial < 25; ++trial) {
        const LabeledFeatures batch = random_batch(rng);
        HcConfig cfg;
        cfg.metric = metric;
        cfg.margin_alpha = alpha;
        // Skip configurations sitting numerically on the hinge.
        bool near_hinge = false;
        for (int cls : classes_present(batch)) {
          const auto c = modality_centers(batch, cls);
          if (std::abs(center_metric(c.c1, c.c2, metric) - alpha) < 1e-3) near_hinge = true;
        }
        if (near_hinge) continue;
        const Vec analytic = flatten(hc_loss_gradient(batch, cfg));
        const auto f = [&](const Vec& x) {
          return on_flat(batch, x, [&](const LabeledFeatures& b) { return hc_loss(b, cfg); });
        };
        CHECK(oracle::max_grad_rel_err(f, flatten(batch), analytic) < 1e-6);
      }
    }
  }
}

TEST_CASE("hc_loss invariants") {
  std::mt19937_64 rng(17);
  HcConfig euclid;
  HcConfig cosine;
  cosine.metric = Metric::Cosine;
  for (int trial = 0; trial < 100; ++trial) {
    LabeledFeatures batch = random_batch(rng);
    const double loss = hc_loss(batch, euclid);
    CHECK(loss >= 0.0);

    // Quadratic scaling under the squared-Euclidean metric.
    LabeledFeatures scaled = batch;
    for (auto& f : scaled.features)
      for (double& x : f) x *= 3.0;
    CHECK(hc_loss(scaled, euclid) == doctest::Approx(9.0 * loss).epsilon(1e-9));

    // Permutation invariance.
    LabeledFeatures shuffled = batch;
    std::vector<std::size_t> perm(batch.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      shuffled.features[i] = batch.features[perm[i]];
      shuffled.labels[i] = batch.labels[perm[i]];
      shuffled.modalities[i] = batch.modalities[perm[i]];
    }
    CHECK(hc_loss(shuffled, euclid) == doctest::Approx(loss).epsilon(1e-10));

    // Per-class cosine term lies in [0, 2].
    for (int cls : classes_present(batch)) {
      const auto c = modality_centers(batch, cls);
      const double d = center_metric(c.c1, c.c2, Metric::Cosine);
      CHECK(d >= 0.0);
      CHECK(d <= 2.0);
    }

    // Equal-count pulls cancel: per-class gradient sum is zero.
    const auto grads = hc_loss_gradient(batch, euclid);
    for (int cls : classes_present(batch)) {
      Vec sum(batch.features[0].size(), 0.0);
      double gnorm = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch.labels[i] != cls) continue;
        axpy(sum, 1.0, grads[i]);
        gnorm += norm(grads[i]);
      }
      CHECK(norm(sum) <= 1e-10 * std::max(1.0, gnorm));
    }
  }
}

TEST_CASE("strong_constraint_loss worked examples") {
  CHECK(strong_constraint_loss(kSpecBatch, 0.0) == doctest::Approx(7.0).epsilon(1e-10));

  LabeledFeatures identical{
      {{1.0, 0.0}, {3.0, 0.0}, {1.0, 0.0}, {3.0, 0.0}}, {0, 0, 0, 0}, {1, 1, 2, 2}};
  CHECK(strong_constraint_loss(identical, 0.0) == 0.0);
}

TEST_CASE("strong constraint dominates weak constraint") {
  std::mt19937_64 rng(19);
  HcConfig weak;
  for (int trial = 0; trial < 1000; ++trial) {
    const LabeledFeatures batch = random_batch(rng, 2, 3, 3);
    for (double alpha : {0.0, 0.5}) {
      weak.margin_alpha = alpha;
      CHECK(strong_constraint_loss(batch, alpha) >= hc_loss(batch, weak) - 1e-12);
    }
  }
}

TEST_CASE("strong_constraint_gradient matches finite differences") {
  std::mt19937_64 rng(23);
  for (double alpha : {0.0, 0.3}) {
    for (int trial = 0; trial < 25; ++trial) {
      const LabeledFeatures batch = random_batch(rng);
      const Vec analytic = flatten(strong_constraint_gradient(batch, alpha));
      const auto f = [&](const Vec& x) {
        return on_flat(batch, x,
                       [&](const LabeledFeatures& b) { return strong_constraint_loss(b, alpha); });
      };
      CHECK(oracle::max_grad_rel_err(f, flatten(batch), analytic) < 1e-6);
    }
  }
}

TEST_CASE("center_loss worked examples") {
  {
    CenterLossState state;
    state.centers[0] = {0.0, 0.0};
    LabeledFeatures batch{{{3.0, 4.0}}, {0}, {1}};
    const auto r = center_loss(batch, state);
    CHECK(r.loss == doctest::Approx(12.5).epsilon(1e-10));
    CHECK(r.grads[0] == Vec{3.0, 4.0});
  }
  {
    CenterLossState state;
    state.centers[0] = {1.0, 2.0};
    LabeledFeatures batch{{{1.0, 2.0}}, {0}, {1}};
    const auto r = center_loss(batch, state);
    CHECK(r.loss == 0.0);
    CHECK(r.grads[0] == Vec{0.0, 0.0});
    CHECK(state.centers[0] == Vec{1.0, 2.0});
  }
  {
    CenterLossState state;
    state.center_lr_alpha = 0.0;
    state.centers[0] = {1.0, 1.0};
    LabeledFeatures batch{{{5.0, 5.0}}, {0}, {1}};
    center_loss(batch, state);
    CHECK(state.centers[0] == Vec{1.0, 1.0});
  }
  {
    CenterLossState state;
    LabeledFeatures batch{{{1.0}}, {3}, {1}};
    CHECK_THROWS_AS(center_loss(batch, state), std::invalid_argument);
  }
}

TEST_CASE("center_loss update rule moves centers toward samples") {
  CenterLossState state;
  state.center_lr_alpha = 0.3;
  state.centers[0] = {0.0};
  LabeledFeatures batch{{{2.0}, {4.0}}, {0, 0}, {1, 2}};
  center_loss(batch, state);
  // delta = ((0-2) + (0-4)) / (1+2) = -2; c <- 0 - 0.3*(-2) = 0.6
  CHECK(state.centers[0][0] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("total_loss") {
  CHECK(total_loss(2.0, 5.0, 0.5) == doctest::Approx(4.5).epsilon(1e-12));
  CHECK(total_loss(1.7, 99.0, 0.0) == 1.7);
  CHECK_THROWS_AS(total_loss(1.0, 1.0, -0.5), std::invalid_argument);
}
