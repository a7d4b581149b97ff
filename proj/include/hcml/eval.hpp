// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hcml/data.hpp"
#include "hcml/network.hpp"

namespace hcml {

/// Gallery construction and trial-averaging settings.
struct EvalProtocol {
  int shot = 1;            // gallery images per identity (1 = single, 10 = multi)
  int trials = 10;
  int probe_modality = 2;  // infrared probes by default
  std::vector<std::pair<int, int>> exclusion_pairs;  // (probe camera, excluded gallery camera)
  std::optional<std::set<int>> gallery_camera_filter;
  std::uint64_t seed = 0;

  void validate() const {
    if (shot < 1 || trials < 1) throw std::invalid_argument("EvalProtocol: shot and trials >= 1");
    if (probe_modality != 1 && probe_modality != 2)
      throw std::invalid_argument("EvalProtocol: probe modality must be 1 or 2");
  }
};

struct GalleryProbe {
  std::vector<std::size_t> gallery;  // indices into the test set
  std::vector<std::size_t> probes;
};

/// Probes are all probe-modality samples; the gallery holds `shot` randomly
/// chosen opposite-modality samples per identity, after the camera filter.
inline GalleryProbe build_gallery(const Dataset& test, const EvalProtocol& protocol, Rng& rng) {
  protocol.validate();
  const int gallery_modality = protocol.probe_modality == 2 ? 1 : 2;
  GalleryProbe out;
  std::map<int, std::vector<std::size_t>> eligible;
  for (std::size_t i = 0; i < test.samples.size(); ++i) {
    const Sample& s = test.samples[i];
    if (s.modality == protocol.probe_modality) {
      out.probes.push_back(i);
    } else if (s.modality == gallery_modality &&
               (!protocol.gallery_camera_filter ||
                protocol.gallery_camera_filter->count(s.camera))) {
      eligible[s.identity].push_back(i);
    }
  }
  for (int identity : test.identities()) {
    auto it = eligible.find(identity);
    if (it == eligible.end() || it->second.empty())
      throw std::invalid_argument("build_gallery: identity " + std::to_string(identity) +
                                  " has no eligible gallery samples");
    const auto& pool = it->second;
    if (pool.size() >= static_cast<std::size_t>(protocol.shot)) {
      std::sample(pool.begin(), pool.end(), std::back_inserter(out.gallery),
                  static_cast<std::size_t>(protocol.shot), rng);
    } else {
      std::uniform_int_distribution<std::size_t> dist(0, pool.size() - 1);
      for (int k = 0; k < protocol.shot; ++k) out.gallery.push_back(pool[dist(rng)]);
    }
  }
  return out;
}

/// Ascending squared Euclidean distance; masked-out entries removed; ties
/// broken by gallery index.
inline std::vector<std::size_t> rank_gallery(const Vec& probe,
                                             const std::vector<Vec>& gallery,
                                             const std::vector<bool>& excluded) {
  if (!excluded.empty() && excluded.size() != gallery.size())
    throw std::invalid_argument("rank_gallery: mask size mismatch");
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    if (!excluded.empty() && excluded[i]) continue;
    scored.emplace_back(squared_distance(probe, gallery[i]), i);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::size_t> order;
  order.reserve(scored.size());
  for (const auto& [d, i] : scored) order.push_back(i);
  return order;
}

/// One probe's ranked gallery identities plus its own identity.
struct RankedProbe {
  int probe_identity = 0;
  std::vector<int> ranked_identities;
};

/// cmc[k-1] = fraction of probes whose first correct match has rank <= k.
inline Vec cmc_curve(const std::vector<RankedProbe>& rankings, std::size_t max_rank) {
  if (rankings.empty()) throw std::invalid_argument("cmc_curve: no probes");
  Vec cmc(max_rank, 0.0);
  for (const auto& r : rankings) {
    std::size_t first = max_rank + 1;
    for (std::size_t k = 0; k < r.ranked_identities.size(); ++k) {
      if (r.ranked_identities[k] == r.probe_identity) {
        first = k + 1;
        break;
      }
    }
    if (first > r.ranked_identities.size())
      throw std::invalid_argument("cmc_curve: probe with no valid match");
    for (std::size_t k = first - 1; k < max_rank; ++k) cmc[k] += 1.0;
  }
  for (double& x : cmc) x /= static_cast<double>(rankings.size());
  return cmc;
}

/// AP per probe = mean over relevant positions r of precision@r.
inline double mean_average_precision(const std::vector<RankedProbe>& rankings) {
  if (rankings.empty()) throw std::invalid_argument("mean_average_precision: no probes");
  double sum_ap = 0.0;
  for (const auto& r : rankings) {
    std::size_t relevant = 0;
    double ap = 0.0;
    for (std::size_t k = 0; k < r.ranked_identities.size(); ++k) {
      if (r.ranked_identities[k] == r.probe_identity) {
        ++relevant;
        ap += static_cast<double>(relevant) / static_cast<double>(k + 1);
      }
    }
    if (relevant == 0)
      throw std::invalid_argument("mean_average_precision: probe with no valid match");
    sum_ap += ap / static_cast<double>(relevant);
  }
  return sum_ap / static_cast<double>(rankings.size());
}

struct TrialResult {
  Vec cmc;
  double map = 0.0;
  double rank1 = 0.0;
};

struct EvalReport {
  Vec cmc;  // mean curve across trials
  double map = 0.0;
  std::vector<TrialResult> trials;
  double mean_rank1 = 0.0, std_rank1 = 0.0;
  double mean_map = 0.0, std_map = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / xs.size())};
}

}  // namespace detail

/// Repeated-trial evaluation: per trial a fresh gallery draw, descriptors for
/// everything involved, ranking, CMC and mAP. Per-trial generators derive from
/// protocol.seed by trial index.
inline EvalReport evaluate(const ModelParams& params, const ModelConfig& cfg, const Dataset& test,
                           const EvalProtocol& protocol) {
  protocol.validate();
  EvalReport report;
  std::vector<double> rank1s, maps;

  for (int trial = 0; trial < protocol.trials; ++trial) {
    Rng rng(protocol.seed + static_cast<std::uint64_t>(trial) * 0x2545f4914f6cdd1dULL + 1);
    const GalleryProbe gp = build_gallery(test, protocol, rng);

    std::vector<Vec> gallery_desc;
    gallery_desc.reserve(gp.gallery.size());
    for (std::size_t gi : gp.gallery) {
      const Sample& s = test.samples[gi];
      gallery_desc.push_back(extract_descriptor(params, cfg, s.feature_map, s.modality));
    }

    std::vector<RankedProbe> rankings;
    rankings.reserve(gp.probes.size());
    for (std::size_t pi : gp.probes) {
      const Sample& probe = test.samples[pi];
      const Vec desc = extract_descriptor(params, cfg, probe.feature_map, probe.modality);

      std::vector<bool> excluded(gp.gallery.size(), false);
      for (const auto& [probe_cam, gallery_cam] : protocol.exclusion_pairs) {
        if (probe.camera != probe_cam) continue;
        for (std::size_t i = 0; i < gp.gallery.size(); ++i)
          if (test.samples[gp.gallery[i]].camera == gallery_cam) excluded[i] = true;
      }
      RankedProbe rp;
      rp.probe_identity = probe.identity;
      for (std::size_t idx : rank_gallery(desc, gallery_desc, excluded))
        rp.ranked_identities.push_back(test.samples[gp.gallery[idx]].identity);
      rankings.push_back(std::move(rp));
    }

    TrialResult tr;
    tr.cmc = cmc_curve(rankings, gp.gallery.size());
    tr.map = mean_average_precision(rankings);
    tr.rank1 = tr.cmc[0];
    rank1s.push_back(tr.rank1);
    maps.push_back(tr.map);
    report.trials.push_back(std::move(tr));
  }

  report.cmc.assign(report.trials[0].cmc.size(), 0.0);
  for (const auto& tr : report.trials) axpy(report.cmc, 1.0, tr.cmc);
  report.cmc = scale(report.cmc, 1.0 / static_cast<double>(report.trials.size()));
  std::tie(report.mean_rank1, report.std_rank1) = detail::mean_std(rank1s);
  std::tie(report.mean_map, report.std_map) = detail::mean_std(maps);
  report.map = report.mean_map;
  return report;
}

/// Projection onto the top-2 principal components of the centered descriptor
/// set. Uses the Gram matrix when there are fewer samples than dimensions.
inline std::vector<std::array<double, 2>> project_2d(const std::vector<Vec>& descriptors) {
  if (descriptors.size() < 2)
    throw std::invalid_argument("project_2d: need at least 2 samples");
  const std::size_t n = descriptors.size();
  const std::size_t dim = descriptors[0].size();
  if (dim < 2) throw std::invalid_argument("project_2d: dimension must be >= 2");

  Vec mean(dim, 0.0);
  for (const auto& d : descriptors) axpy(mean, 1.0, d);
  mean = scale(mean, 1.0 / static_cast<double>(n));
  std::vector<Vec> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = sub(descriptors[i], mean);

  // Jacobi eigensolver on the smaller of covariance (dim x dim) and Gram (n x n).
  const bool use_gram = n < dim;
  const std::size_t m = use_gram ? n : dim;
  Mat a(m, m);
  if (use_gram) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j)
        a(i, j) = a(j, i) = dot(centered[i], centered[j]) / static_cast<double>(n);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = r; c < dim; ++c) a(r, c) += centered[i][r] * centered[i][c];
    for (std::size_t r = 0; r < dim; ++r)
      for (std::size_t c = r; c < dim; ++c) a(c, r) = (a(r, c) /= static_cast<double>(n));
  }

  Mat v(m, m);
  for (std::size_t i = 0; i < m; ++i) v(i, i) = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cth = 1.0 / std::sqrt(t * t + 1.0);
        const double sth = t * cth;
        for (std::size_t k = 0; k < m; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = cth * akp - sth * akq;
          a(k, q) = sth * akp + cth * akq;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = cth * apk - sth * aqk;
          a(q, k) = sth * apk + cth * aqk;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = cth * vkp - sth * vkq;
          v(k, q) = sth * vkp + cth * vkq;
        }
      }
    }
  }

  std::vector<std::pair<double, std::size_t>> eig;
  for (std::size_t i = 0; i < m; ++i) eig.emplace_back(a(i, i), i);
  std::sort(eig.begin(), eig.end(), std::greater<>());

  // Principal axes in descriptor space.
  std::array<Vec, 2> axes;
  for (int comp = 0; comp < 2; ++comp) {
    const std::size_t col = eig[static_cast<std::size_t>(comp)].second;
    Vec axis(dim, 0.0);
    if (use_gram) {
      // Covariance eigenvector = Xᵀ u, normalized.
      for (std::size_t i = 0; i < n; ++i) axpy(axis, v(i, col), centered[i]);
      const double nn = norm(axis);
      if (nn > 0) axis = scale(axis, 1.0 / nn);
    } else {
      for (std::size_t r = 0; r < dim; ++r) axis[r] = v(r, col);
    }
    // Sign convention: largest-magnitude loading positive.
    std::size_t imax = 0;
    for (std::size_t r = 1; r < dim; ++r)
      if (std::abs(axis[r]) > std::abs(axis[imax])) imax = r;
    if (axis[imax] < 0) axis = scale(axis, -1.0);
    axes[static_cast<std::size_t>(comp)] = std::move(axis);
  }

  std::vector<std::array<double, 2>> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = {dot(centered[i], axes[0]), dot(centered[i], axes[1])};
  return out;
}

}  // namespace hcml
