// SPDX-License-Identifier: Apache-2.0
//
// The shared synthetic benchmark used by the trend-level checks: 32 identities
// with 20 samples per modality on 12x4x8 feature maps, 24/8 identity-disjoint
// split, seed 42.
#pragma once

#include "hcml/config.hpp"

namespace bench {

inline hcml::RunConfig benchmark_config() {
  hcml::RunConfig cfg;
  cfg.seed = 42;
  cfg.data.n_identities = 32;
  cfg.data.samples_per_modality = 20;
  cfg.data.h = 12;
  cfg.data.w = 4;
  cfg.data.c = 8;
  cfg.data.identity_signal_scale = 1.0;
  cfg.data.modality_gap_scale = 1.0;
  cfg.data.noise_scale = 0.3;
  cfg.data.stripe_structure = true;
  cfg.data.seed = 42;
  cfg.train_fraction = 0.75;  // 24 train / 8 test identities

  cfg.model.p = 6;
  cfg.model.h = 12;
  cfg.model.w = 4;
  cfg.model.c = 8;
  cfg.model.branch_hidden = 16;
  cfg.model.embed_dim = 16;

  cfg.train.epochs = 8;
  cfg.train.decay_epoch = 6;
  cfg.train.l = 4;
  cfg.train.t = 2;  // small batches keep the per-sample HC pull strong (2/T scale)
  cfg.train.lr_initial = 3e-4;
  cfg.train.lr_after_decay = 3e-6;
  cfg.train.momentum = 0.9;
  cfg.train.seed = 42;

  cfg.eval.shot = 1;
  cfg.eval.trials = 10;
  cfg.eval.seed = 42;
  return cfg;
}

}  // namespace bench
