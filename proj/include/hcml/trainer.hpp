// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "hcml/data.hpp"
#include "hcml/losses.hpp"
#include "hcml/network.hpp"
#include "hcml/sampler.hpp"

namespace hcml {

enum class LossKind { HeteroCenter, Center };
enum class SamplerKind { IdentityModalityBalanced, Legacy };

struct TrainConfig {
  int epochs = 40;
  int batches_per_epoch = 0;  // 0 = ceil(train samples / K)
  int l = 4;
  int t = 8;
  HcConfig hc;  // carries lambda, metric, margin, constraint
  LossKind loss_kind = LossKind::HeteroCenter;
  double center_lr = 0.3;
  SamplerKind sampler_kind = SamplerKind::IdentityModalityBalanced;
  double lr_initial = 1e-2;
  double lr_after_decay = 1e-4;
  int decay_epoch = 30;
  double momentum = 0.9;
  std::uint64_t seed = 42;

  void validate() const {
    if (epochs <= 0 || l <= 0 || t <= 0) throw std::invalid_argument("TrainConfig: counts");
    if (lr_initial <= 0 || lr_after_decay <= 0)
      throw std::invalid_argument("TrainConfig: learning rates must be positive");
    if (momentum < 0 || momentum >= 1)
      throw std::invalid_argument("TrainConfig: momentum must be in [0,1)");
    if (decay_epoch > epochs) throw std::invalid_argument("TrainConfig: decay_epoch > epochs");
  }
};

struct StepRecord {
  int step = 0;
  int epoch = 0;
  double ce = 0.0;
  double hc = 0.0;  // value of the auxiliary loss (HC family or center loss)
  double total = 0.0;
  double lr = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double mean_ce = 0.0;
  double mean_hc = 0.0;
  double mean_total = 0.0;
  double probe_center_distance = 0.0;  // NaN when no held-out set was given
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

/// v' = μ·v − lr·g; param' = param + v'. Element-wise over a flat buffer.
inline void sgd_momentum_step(Vec& param, Vec& velocity, const Vec& grad, double lr,
                              double momentum) {
  if (param.size() != velocity.size() || param.size() != grad.size())
    throw std::invalid_argument("sgd_momentum_step: shape mismatch");
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] - lr * grad[i];
    param[i] += velocity[i];
  }
}

/// Mean over classes of the Euclidean distance between the two per-class
/// modality centers, computed on retrieval descriptors.
inline double center_distance_probe(const ModelParams& params, const ModelConfig& cfg,
                                    const Dataset& heldout) {
  LabeledFeatures feats;
  for (const auto& s : heldout.samples) {
    feats.features.push_back(extract_descriptor(params, cfg, s.feature_map, s.modality));
    feats.labels.push_back(s.identity);
    feats.modalities.push_back(s.modality);
  }
  const auto classes = classes_present(feats);
  if (classes.empty()) throw std::invalid_argument("center_distance_probe: empty held-out set");
  double total = 0.0;
  for (int cls : classes) {
    const ModalityCenters c = modality_centers(feats, cls);
    total += std::sqrt(squared_distance(c.c1, c.c2));
  }
  return total / static_cast<double>(classes.size());
}

namespace detail {

// Contiguous class indices for the classifier heads, in sorted identity order.
inline std::map<int, int> class_remap(const Dataset& ds) {
  std::map<int, int> remap;
  int next = 0;
  for (int identity : ds.identities()) remap[identity] = next++;
  return remap;
}

}  // namespace detail

struct TrainResult {
  ModelParams params;
  TrainHistory history;
  std::map<int, int> class_remap;  // identity -> classifier index
};

/// Full training loop: sample, forward, per-stripe CE + auxiliary loss,
/// backward, SGD-with-momentum update, step learning-rate decay.
inline TrainResult train(const ModelConfig& model_cfg_in, const TrainConfig& train_cfg,
                         const Dataset& train_set, const Dataset* heldout = nullptr) {
  train_cfg.validate();
  const std::map<int, int> remap = detail::class_remap(train_set);

  ModelConfig cfg = model_cfg_in;
  cfg.n_classes = static_cast<int>(remap.size());
  cfg.validate();

  const DatasetIndex index = build_index(train_set);
  const int batch_size = 2 * train_cfg.l * train_cfg.t;
  const int batches_per_epoch =
      train_cfg.batches_per_epoch > 0
          ? train_cfg.batches_per_epoch
          : static_cast<int>((train_set.samples.size() + batch_size - 1) / batch_size);

  TrainResult result;
  result.class_remap = remap;
  result.params = init_params(cfg, train_cfg.seed);
  ModelParams velocity = zeros_like(result.params);
  Rng rng(train_cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<CenterLossState> center_states;
  if (train_cfg.loss_kind == LossKind::Center) {
    center_states.resize(cfg.p);
    for (auto& st : center_states) {
      st.center_lr_alpha = train_cfg.center_lr;
      for (const auto& [identity, idx] : remap)
        st.centers[idx] = Vec(cfg.embed_dim, 0.0);
    }
  }

  int step = 0;
  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    const double lr = epoch < train_cfg.decay_epoch ? train_cfg.lr_initial
                                                    : train_cfg.lr_after_decay;
    double sum_ce = 0.0, sum_hc = 0.0, sum_total = 0.0;
    for (int b = 0; b < batches_per_epoch; ++b, ++step) {
      MiniBatch batch =
          train_cfg.sampler_kind == SamplerKind::IdentityModalityBalanced
              ? sample_batch(index, static_cast<std::size_t>(train_cfg.l),
                             static_cast<std::size_t>(train_cfg.t), rng)
              : legacy_sample_batch(index, static_cast<std::size_t>(batch_size), rng);

      std::vector<Vec> inputs;
      std::vector<int> labels;
      inputs.reserve(batch.size());
      labels.reserve(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const Sample& s = train_set.samples[static_cast<std::size_t>(batch.sample_ids[i])];
        inputs.push_back(s.feature_map);
        labels.push_back(remap.at(s.identity));
      }

      auto [emb, trace] = forward(result.params, cfg, inputs, batch.modalities);

      double ce = 0.0, aux = 0.0;
      std::vector<std::vector<Vec>> logit_grads(cfg.p), norm_grads(cfg.p);
      for (int s = 0; s < cfg.p; ++s) {
        CrossEntropyResult ce_s = cross_entropy(emb.logits[s], labels);
        ce += ce_s.loss;
        logit_grads[s] = std::move(ce_s.logit_grads);

        LabeledFeatures stripe{emb.normalized[s], labels, batch.modalities};
        std::vector<Vec> aux_grads;
        if (train_cfg.loss_kind == LossKind::HeteroCenter && train_cfg.hc.lambda == 0.0) {
          // CE-only run; the HC term is neither weighted nor required to be
          // well defined (legacy batches may miss a modality in some class).
          aux_grads.assign(batch.size(), Vec(cfg.embed_dim, 0.0));
        } else if (train_cfg.loss_kind == LossKind::Center) {
          CenterLossResult cl = center_loss(stripe, center_states[s]);
          aux += cl.loss;
          aux_grads = std::move(cl.grads);
        } else if (train_cfg.hc.constraint == Constraint::Strong) {
          aux += strong_constraint_loss(stripe, train_cfg.hc.margin_alpha);
          aux_grads = strong_constraint_gradient(stripe, train_cfg.hc.margin_alpha);
        } else {
          aux += hc_loss(stripe, train_cfg.hc);
          aux_grads = hc_loss_gradient(stripe, train_cfg.hc);
        }
        norm_grads[s].resize(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i)
          norm_grads[s][i] = scale(aux_grads[i], train_cfg.hc.lambda);
      }
      const double total = total_loss(ce, aux, train_cfg.hc.lambda);
      if (!std::isfinite(total))
        throw std::runtime_error("train: non-finite loss at step " + std::to_string(step) +
                                 " (ce=" + std::to_string(ce) + ", aux=" + std::to_string(aux) +
                                 ")");

      ModelParams grads = backward(result.params, cfg, trace, logit_grads, norm_grads);
      auto pit = [&]() {
        std::vector<Vec*> ps, vs;
        std::vector<const Vec*> gs;
        result.params.for_each([&](Vec& v) { ps.push_back(&v); });
        velocity.for_each([&](Vec& v) { vs.push_back(&v); });
        grads.for_each([&](const Vec& v) { gs.push_back(&v); });
        for (std::size_t i = 0; i < ps.size(); ++i)
          sgd_momentum_step(*ps[i], *vs[i], *gs[i], lr, train_cfg.momentum);
      };
      pit();

      result.history.steps.push_back({step, epoch, ce, aux, total, lr});
      sum_ce += ce;
      sum_hc += aux;
      sum_total += total;
    }
    EpochRecord er;
    er.epoch = epoch;
    er.mean_ce = sum_ce / batches_per_epoch;
    er.mean_hc = sum_hc / batches_per_epoch;
    er.mean_total = sum_total / batches_per_epoch;
    er.probe_center_distance =
        heldout ? center_distance_probe(result.params, cfg, *heldout)
                : std::numeric_limits<double>::quiet_NaN();
    result.history.epochs.push_back(er);
  }
  return result;
}

}  // namespace hcml
