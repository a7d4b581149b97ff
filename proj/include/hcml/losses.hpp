// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "hcml/linalg.hpp"

namespace hcml {

enum class Metric { SquaredEuclidean, Cosine };
enum class Constraint { Weak, Strong };

/// Configuration of the hetero-center loss family.
struct HcConfig {
  Metric metric = Metric::SquaredEuclidean;
  double margin_alpha = 0.0;
  Constraint constraint = Constraint::Weak;
  double lambda = 0.5;
};

/// A batch of embeddings with identity labels and modality tags (1 or 2).
struct LabeledFeatures {
  std::vector<Vec> features;
  std::vector<int> labels;
  std::vector<int> modalities;

  std::size_t size() const { return features.size(); }

  void validate() const {
    if (labels.size() != features.size() || modalities.size() != features.size())
      throw std::invalid_argument("LabeledFeatures: sequence length mismatch");
    for (int m : modalities)
      if (m != 1 && m != 2) throw std::invalid_argument("LabeledFeatures: modality must be 1 or 2");
  }
};

struct CrossEntropyResult {
  double loss = 0.0;
  std::vector<Vec> logit_grads;
};

/// Batch-sum cross entropy. Gradient per sample is softmax(logits) − onehot(label).
inline CrossEntropyResult cross_entropy(const std::vector<Vec>& logits,
                                        const std::vector<int>& labels) {
  if (logits.size() != labels.size())
    throw std::invalid_argument("cross_entropy: batch size mismatch");
  CrossEntropyResult out;
  out.logit_grads.reserve(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= logits[i].size())
      throw std::invalid_argument("cross_entropy: label out of range at sample " +
                                  std::to_string(i));
    Vec p = softmax(logits[i]);
    out.loss -= std::log(p[static_cast<std::size_t>(y)]);
    p[static_cast<std::size_t>(y)] -= 1.0;
    out.logit_grads.push_back(std::move(p));
  }
  return out;
}

struct ModalityCenters {
  Vec c1;
  Vec c2;
  std::size_t m = 0;  // modality-1 count
  std::size_t n = 0;  // modality-2 count
};

inline std::set<int> classes_present(const LabeledFeatures& batch) {
  return std::set<int>(batch.labels.begin(), batch.labels.end());
}

/// Per-class modality feature means.
inline ModalityCenters modality_centers(const LabeledFeatures& batch, int cls) {
  batch.validate();
  ModalityCenters out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.labels[i] != cls) continue;
    const Vec& x = batch.features[i];
    if (batch.modalities[i] == 1) {
      if (out.c1.empty()) out.c1.assign(x.size(), 0.0);
      axpy(out.c1, 1.0, x);
      ++out.m;
    } else {
      if (out.c2.empty()) out.c2.assign(x.size(), 0.0);
      axpy(out.c2, 1.0, x);
      ++out.n;
    }
  }
  if (out.m == 0 || out.n == 0)
    throw std::invalid_argument("modality_centers: class " + std::to_string(cls) +
                                " is missing a modality");
  out.c1 = scale(out.c1, 1.0 / static_cast<double>(out.m));
  out.c2 = scale(out.c2, 1.0 / static_cast<double>(out.n));
  return out;
}

inline double center_metric(const Vec& c1, const Vec& c2, Metric metric) {
  if (metric == Metric::SquaredEuclidean) return squared_distance(c1, c2);
  const double n1 = norm(c1), n2 = norm(c2);
  if (n1 == 0.0 || n2 == 0.0)
    throw std::invalid_argument("center_metric: cosine undefined for zero center");
  return 1.0 - dot(c1, c2) / (n1 * n2);
}

/// Hinged sum over classes of D(c1, c2) − α.
inline double hc_loss(const LabeledFeatures& batch, const HcConfig& cfg) {
  batch.validate();
  double total = 0.0;
  for (int cls : classes_present(batch)) {
    const ModalityCenters c = modality_centers(batch, cls);
    total += std::max(center_metric(c.c1, c.c2, cfg.metric) - cfg.margin_alpha, 0.0);
  }
  return total;
}

namespace detail {

// ∂D/∂c for the cosine metric, D = 1 − u·v/(|u||v|); returns the pair (∂D/∂u, ∂D/∂v).
inline std::pair<Vec, Vec> cosine_center_grads(const Vec& u, const Vec& v) {
  const double nu = norm(u), nv = norm(v);
  const double s = dot(u, v);
  Vec gu(u.size()), gv(v.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    gu[k] = (s * u[k] / (nu * nu) - v[k]) / (nu * nv);
    gv[k] = (s * v[k] / (nv * nv) - u[k]) / (nu * nv);
  }
  return {gu, gv};
}

}  // namespace detail

/// Per-sample gradients of hc_loss. Modality-1 samples of class i receive
/// (2/m)(c1 − c2) under the squared-Euclidean metric; the hinge zeroes the
/// gradient of any class already inside the margin.
inline std::vector<Vec> hc_loss_gradient(const LabeledFeatures& batch, const HcConfig& cfg) {
  batch.validate();
  std::vector<Vec> grads(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    grads[i].assign(batch.features[i].size(), 0.0);

  for (int cls : classes_present(batch)) {
    const ModalityCenters c = modality_centers(batch, cls);
    const double d = center_metric(c.c1, c.c2, cfg.metric);
    if (d <= cfg.margin_alpha) continue;  // inactive hinge side

    Vec g1, g2;  // ∂loss/∂c1, ∂loss/∂c2
    if (cfg.metric == Metric::SquaredEuclidean) {
      g1 = scale(sub(c.c1, c.c2), 2.0);
      g2 = scale(g1, -1.0);
    } else {
      std::tie(g1, g2) = detail::cosine_center_grads(c.c1, c.c2);
    }
    const double inv_m = 1.0 / static_cast<double>(c.m);
    const double inv_n = 1.0 / static_cast<double>(c.n);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (batch.labels[i] != cls) continue;
      if (batch.modalities[i] == 1)
        axpy(grads[i], inv_m, g1);
      else
        axpy(grads[i], inv_n, g2);
    }
  }
  return grads;
}

namespace detail {

// Per-dimension population variance of one modality's features within a class.
inline Vec modality_variance(const LabeledFeatures& batch, int cls, int modality,
                             const Vec& center) {
  Vec v(center.size(), 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.labels[i] != cls || batch.modalities[i] != modality) continue;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double d = batch.features[i][k] - center[k];
      v[k] += d * d;
    }
    ++count;
  }
  return scale(v, 1.0 / static_cast<double>(count));
}

}  // namespace detail

/// Center-plus-variance constraint: Σ_cls [ ||c1−c2||² + ||v1−v2||² − α ]₊.
inline double strong_constraint_loss(const LabeledFeatures& batch, double margin_alpha) {
  batch.validate();
  double total = 0.0;
  for (int cls : classes_present(batch)) {
    const ModalityCenters c = modality_centers(batch, cls);
    const Vec v1 = detail::modality_variance(batch, cls, 1, c.c1);
    const Vec v2 = detail::modality_variance(batch, cls, 2, c.c2);
    total += std::max(squared_distance(c.c1, c.c2) + squared_distance(v1, v2) - margin_alpha, 0.0);
  }
  return total;
}

/// Exact per-sample gradients of strong_constraint_loss. The variance term
/// contributes 2(v1−v2)_k · (2/m)(x_k − c1_k) to a modality-1 sample; the center
/// dependence of the variance cancels in the chain rule.
inline std::vector<Vec> strong_constraint_gradient(const LabeledFeatures& batch,
                                                   double margin_alpha) {
  batch.validate();
  std::vector<Vec> grads(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    grads[i].assign(batch.features[i].size(), 0.0);

  for (int cls : classes_present(batch)) {
    const ModalityCenters c = modality_centers(batch, cls);
    const Vec v1 = detail::modality_variance(batch, cls, 1, c.c1);
    const Vec v2 = detail::modality_variance(batch, cls, 2, c.c2);
    const double value =
        squared_distance(c.c1, c.c2) + squared_distance(v1, v2) - margin_alpha;
    if (value <= 0.0) continue;

    const Vec center_diff = sub(c.c1, c.c2);
    const Vec var_diff = sub(v1, v2);
    const double inv_m = 1.0 / static_cast<double>(c.m);
    const double inv_n = 1.0 / static_cast<double>(c.n);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (batch.labels[i] != cls) continue;
      const Vec& x = batch.features[i];
      Vec& g = grads[i];
      if (batch.modalities[i] == 1) {
        for (std::size_t k = 0; k < g.size(); ++k)
          g[k] += 2.0 * inv_m * center_diff[k] +
                  2.0 * var_diff[k] * 2.0 * inv_m * (x[k] - c.c1[k]);
      } else {
        for (std::size_t k = 0; k < g.size(); ++k)
          g[k] += -2.0 * inv_n * center_diff[k] -
                  2.0 * var_diff[k] * 2.0 * inv_n * (x[k] - c.c2[k]);
      }
    }
  }
  return grads;
}

/// Learned per-class centers for the classic center-loss comparison.
struct CenterLossState {
  std::map<int, Vec> centers;
  double center_lr_alpha = 0.3;
};

struct CenterLossResult {
  double loss = 0.0;
  std::vector<Vec> grads;
};

/// ½ Σ ||x_i − c_{y_i}||² with the standard delayed center update
/// c ← c − α · Σ(c − x)/(1 + count).
inline CenterLossResult center_loss(const LabeledFeatures& batch, CenterLossState& state) {
  batch.validate();
  CenterLossResult out;
  out.grads.resize(batch.size());
  std::map<int, Vec> delta;
  std::map<int, std::size_t> counts;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto it = state.centers.find(batch.labels[i]);
    if (it == state.centers.end())
      throw std::invalid_argument("center_loss: no center for class " +
                                  std::to_string(batch.labels[i]));
    const Vec diff = sub(batch.features[i], it->second);
    out.loss += 0.5 * dot(diff, diff);
    out.grads[i] = diff;
    auto& d = delta[batch.labels[i]];
    if (d.empty()) d.assign(diff.size(), 0.0);
    axpy(d, -1.0, diff);  // accumulates (c − x)
    ++counts[batch.labels[i]];
  }
  for (auto& [cls, d] : delta) {
    Vec& c = state.centers[cls];
    axpy(c, -state.center_lr_alpha / (1.0 + static_cast<double>(counts[cls])), d);
  }
  return out;
}

/// L = L_CE + λ · L_HC
inline double total_loss(double ce, double hc, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("total_loss: lambda must be non-negative");
  return ce + lambda * hc;
}

}  // namespace hcml
