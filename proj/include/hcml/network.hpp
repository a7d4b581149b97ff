// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "hcml/linalg.hpp"

namespace hcml {

/// Two-stream local feature network shape.
struct ModelConfig {
  int p = 6;              // stripe count
  int h = 12, w = 4, c = 8;  // input feature map shape
  int branch_hidden = 16;    // channels of the per-branch 1x1 transform
  int embed_dim = 16;        // per-stripe embedding size d
  int n_classes = 24;
  double leaky_slope = 0.01;

  void validate() const {
    if (p <= 0 || h <= 0 || w <= 0 || c <= 0 || branch_hidden <= 0 || embed_dim <= 0 ||
        n_classes <= 0)
      throw std::invalid_argument("ModelConfig: all counts must be positive");
    if (h % p != 0) throw std::invalid_argument("ModelConfig: H must be divisible by p");
  }

  int positions() const { return h * w; }
  int stripe_rows() const { return h / p; }
  int stripe_positions() const { return stripe_rows() * w; }
  int descriptor_dim() const { return p * embed_dim; }
};

/// All learnable parameters. The reduction layer is one physical set used by
/// both branches; the branch transforms and per-stripe classifiers are private.
struct ModelParams {
  std::array<Mat, 2> branch_w;  // [branch] hidden x C
  std::array<Vec, 2> branch_b;  // [branch] hidden
  std::vector<Mat> reduce_w;    // [stripe] d x hidden, shared across branches
  std::vector<Vec> reduce_b;    // [stripe] d
  std::vector<Mat> cls_w;       // [stripe] n_classes x d
  std::vector<Vec> cls_b;       // [stripe] n_classes

  template <typename Fn>
  void for_each(Fn&& fn) {
    for (auto& m : branch_w) fn(m.data);
    for (auto& v : branch_b) fn(v);
    for (auto& m : reduce_w) fn(m.data);
    for (auto& v : reduce_b) fn(v);
    for (auto& m : cls_w) fn(m.data);
    for (auto& v : cls_b) fn(v);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& m : branch_w) fn(m.data);
    for (const auto& v : branch_b) fn(v);
    for (const auto& m : reduce_w) fn(m.data);
    for (const auto& v : reduce_b) fn(v);
    for (const auto& m : cls_w) fn(m.data);
    for (const auto& v : cls_b) fn(v);
  }
};

namespace detail {

inline void init_layer(Mat& w, Vec& b, std::size_t out, std::size_t in, Rng& rng) {
  w = Mat(out, in);
  b.assign(out, 0.0);
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& x : w.data) x = dist(rng);
}

}  // namespace detail

inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams p;
  for (int b = 0; b < 2; ++b)
    detail::init_layer(p.branch_w[b], p.branch_b[b], cfg.branch_hidden, cfg.c, rng);
  p.reduce_w.resize(cfg.p);
  p.reduce_b.resize(cfg.p);
  p.cls_w.resize(cfg.p);
  p.cls_b.resize(cfg.p);
  for (int s = 0; s < cfg.p; ++s) {
    detail::init_layer(p.reduce_w[s], p.reduce_b[s], cfg.embed_dim, cfg.branch_hidden, rng);
    detail::init_layer(p.cls_w[s], p.cls_b[s], cfg.n_classes, cfg.embed_dim, rng);
  }
  return p;
}

inline ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  z.for_each([](Vec& v) { std::fill(v.begin(), v.end(), 0.0); });
  return z;
}

/// Per-stripe batch outputs.
struct EmbeddingSet {
  // [stripe][sample]
  std::vector<std::vector<Vec>> embeddings;  // post-activation, pre-normalization
  std::vector<std::vector<Vec>> normalized;
  std::vector<std::vector<Vec>> logits;
};

/// Activations retained for the backward pass.
struct ForwardTrace {
  ModelConfig cfg;
  std::vector<int> modalities;
  std::vector<Vec> inputs;                        // [sample] H*W*C
  std::vector<std::vector<Vec>> branch_pre;       // [sample][position] hidden, pre-activation
  std::vector<std::vector<Vec>> pooled;           // [sample][stripe] hidden
  std::vector<std::vector<Vec>> embed_pre;        // [sample][stripe] d, pre-activation
  std::vector<std::vector<Vec>> embed_post;       // [sample][stripe] d
};

/// Branch transform at every spatial location, stripe average pooling, shared
/// reduction layer with Leaky ReLU, per-stripe classifiers, per-stripe L2 norm.
inline std::pair<EmbeddingSet, ForwardTrace> forward(const ModelParams& params,
                                                     const ModelConfig& cfg,
                                                     const std::vector<Vec>& inputs,
                                                     const std::vector<int>& modalities) {
  cfg.validate();
  if (inputs.size() != modalities.size())
    throw std::invalid_argument("forward: inputs/modalities length mismatch");
  const std::size_t feature_size = static_cast<std::size_t>(cfg.h) * cfg.w * cfg.c;
  const int positions = cfg.positions();
  const int stripe_pos = cfg.stripe_positions();

  EmbeddingSet out;
  out.embeddings.assign(cfg.p, {});
  out.normalized.assign(cfg.p, {});
  out.logits.assign(cfg.p, {});

  ForwardTrace trace;
  trace.cfg = cfg;
  trace.modalities = modalities;
  trace.inputs = inputs;
  trace.branch_pre.resize(inputs.size());
  trace.pooled.resize(inputs.size());
  trace.embed_pre.resize(inputs.size());
  trace.embed_post.resize(inputs.size());

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].size() != feature_size)
      throw std::invalid_argument("forward: input shape mismatch at sample " + std::to_string(i));
    const int modality = modalities[i];
    if (modality != 1 && modality != 2)
      throw std::invalid_argument("forward: modality must be 1 or 2");
    const Mat& bw = params.branch_w[modality - 1];
    const Vec& bb = params.branch_b[modality - 1];

    auto& pre = trace.branch_pre[i];
    pre.resize(positions);
    std::vector<Vec> act(positions);
    for (int q = 0; q < positions; ++q) {
      Vec x(inputs[i].begin() + static_cast<std::size_t>(q) * cfg.c,
            inputs[i].begin() + static_cast<std::size_t>(q + 1) * cfg.c);
      pre[q] = affine(bw, x, bb);
      act[q].resize(cfg.branch_hidden);
      for (int k = 0; k < cfg.branch_hidden; ++k)
        act[q][k] = leaky_relu(pre[q][k], cfg.leaky_slope);
    }

    trace.pooled[i].resize(cfg.p);
    trace.embed_pre[i].resize(cfg.p);
    trace.embed_post[i].resize(cfg.p);
    for (int s = 0; s < cfg.p; ++s) {
      Vec pooled(cfg.branch_hidden, 0.0);
      for (int q = s * stripe_pos; q < (s + 1) * stripe_pos; ++q) axpy(pooled, 1.0, act[q]);
      pooled = scale(pooled, 1.0 / static_cast<double>(stripe_pos));
      trace.pooled[i][s] = pooled;

      Vec e_pre = affine(params.reduce_w[s], pooled, params.reduce_b[s]);
      Vec e(cfg.embed_dim);
      for (int k = 0; k < cfg.embed_dim; ++k) e[k] = leaky_relu(e_pre[k], cfg.leaky_slope);
      trace.embed_pre[i][s] = std::move(e_pre);
      trace.embed_post[i][s] = e;

      out.embeddings[s].push_back(e);
      out.normalized[s].push_back(l2_normalize(e));
      out.logits[s].push_back(affine(params.cls_w[s], e, params.cls_b[s]));
    }
  }
  return {std::move(out), std::move(trace)};
}

/// Upstream gradients enter at the per-stripe logits and at the per-stripe
/// normalized embeddings; both are chained back to every parameter. The shared
/// reduction layer accumulates contributions from both branches.
inline ModelParams backward(const ModelParams& params, const ModelConfig& cfg,
                            const ForwardTrace& trace,
                            const std::vector<std::vector<Vec>>& logit_grads,
                            const std::vector<std::vector<Vec>>& norm_grads) {
  cfg.validate();
  if (trace.cfg.p != cfg.p || trace.cfg.h != cfg.h || trace.cfg.w != cfg.w ||
      trace.cfg.c != cfg.c || trace.cfg.branch_hidden != cfg.branch_hidden ||
      trace.cfg.embed_dim != cfg.embed_dim)
    throw std::invalid_argument("backward: trace/config mismatch");
  const std::size_t batch = trace.inputs.size();
  if (logit_grads.size() != static_cast<std::size_t>(cfg.p) ||
      norm_grads.size() != static_cast<std::size_t>(cfg.p))
    throw std::invalid_argument("backward: upstream gradients must be per-stripe");
  for (int s = 0; s < cfg.p; ++s)
    if (logit_grads[s].size() != batch || norm_grads[s].size() != batch)
      throw std::invalid_argument("backward: upstream batch size mismatch");

  ModelParams grads = zeros_like(params);
  const int stripe_pos = cfg.stripe_positions();

  for (std::size_t i = 0; i < batch; ++i) {
    const int branch = trace.modalities[i] - 1;
    // Pooled-stripe gradients accumulate from the head before crossing the pool.
    std::vector<Vec> g_pooled(cfg.p);
    for (int s = 0; s < cfg.p; ++s) {
      const Vec& e = trace.embed_post[i][s];
      Vec g_e = affine_backward_input(params.cls_w[s], logit_grads[s][i]);
      accumulate_outer(grads.cls_w[s], logit_grads[s][i], e);
      axpy(grads.cls_b[s], 1.0, logit_grads[s][i]);
      axpy(g_e, 1.0, l2_normalize_backward(e, norm_grads[s][i]));

      Vec g_epre(cfg.embed_dim);
      for (int k = 0; k < cfg.embed_dim; ++k)
        g_epre[k] = g_e[k] * leaky_relu_grad(trace.embed_pre[i][s][k], cfg.leaky_slope);
      accumulate_outer(grads.reduce_w[s], g_epre, trace.pooled[i][s]);
      axpy(grads.reduce_b[s], 1.0, g_epre);
      g_pooled[s] = affine_backward_input(params.reduce_w[s], g_epre);
    }

    for (int s = 0; s < cfg.p; ++s) {
      const Vec g_act = scale(g_pooled[s], 1.0 / static_cast<double>(stripe_pos));
      for (int q = s * stripe_pos; q < (s + 1) * stripe_pos; ++q) {
        Vec g_z(cfg.branch_hidden);
        for (int k = 0; k < cfg.branch_hidden; ++k)
          g_z[k] = g_act[k] * leaky_relu_grad(trace.branch_pre[i][q][k], cfg.leaky_slope);
        Vec x(trace.inputs[i].begin() + static_cast<std::size_t>(q) * cfg.c,
              trace.inputs[i].begin() + static_cast<std::size_t>(q + 1) * cfg.c);
        accumulate_outer(grads.branch_w[branch], g_z, x);
        axpy(grads.branch_b[branch], 1.0, g_z);
      }
    }
  }
  return grads;
}

/// Concatenation of the p L2-normalized stripe embeddings, top to bottom.
inline Vec extract_descriptor(const ModelParams& params, const ModelConfig& cfg, const Vec& input,
                              int modality) {
  auto [emb, trace] = forward(params, cfg, {input}, {modality});
  Vec d;
  d.reserve(static_cast<std::size_t>(cfg.descriptor_dim()));
  for (int s = 0; s < cfg.p; ++s)
    d.insert(d.end(), emb.normalized[s][0].begin(), emb.normalized[s][0].end());
  return d;
}

}  // namespace hcml
