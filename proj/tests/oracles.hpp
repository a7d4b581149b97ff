// SPDX-License-Identifier: Apache-2.0
//
// Test-only reference implementations, kept independent of the library code
// they check: central finite differences, brute-force CMC/mAP.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "hcml/eval.hpp"
#include "hcml/linalg.hpp"

namespace oracle {

inline double rel_err(double got, double want) {
  // The floor keeps roundoff in near-zero finite differences from dominating.
  const double denom = std::max({std::abs(got), std::abs(want), 1e-3});
  return std::abs(got - want) / denom;
}

/// Central finite differences of a scalar function of a flat vector.
inline hcml::Vec finite_difference(const std::function<double(const hcml::Vec&)>& f,
                                   const hcml::Vec& x, double h = 1e-5) {
  hcml::Vec g(x.size());
  hcml::Vec xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + h;
    const double fp = f(xp);
    xp[i] = orig - h;
    const double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Largest relative error between an analytic gradient and finite differences.
inline double max_grad_rel_err(const std::function<double(const hcml::Vec&)>& f,
                               const hcml::Vec& x, const hcml::Vec& analytic, double h = 1e-5) {
  const hcml::Vec fd = finite_difference(f, x, h);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, rel_err(analytic[i], fd[i]));
  return worst;
}

/// Brute-force CMC: for every probe scan the whole ranking for the first
/// correct identity, then count.
inline hcml::Vec brute_cmc(const std::vector<hcml::RankedProbe>& rankings, std::size_t max_rank) {
  hcml::Vec cmc(max_rank, 0.0);
  for (std::size_t k = 1; k <= max_rank; ++k) {
    std::size_t hits = 0;
    for (const auto& r : rankings) {
      bool found = false;
      for (std::size_t j = 0; j < std::min(k, r.ranked_identities.size()); ++j)
        if (r.ranked_identities[j] == r.probe_identity) found = true;
      if (found) ++hits;
    }
    cmc[k - 1] = static_cast<double>(hits) / static_cast<double>(rankings.size());
  }
  return cmc;
}

/// Brute-force mAP from first principles: precision at every relevant rank.
inline double brute_map(const std::vector<hcml::RankedProbe>& rankings) {
  double total = 0.0;
  for (const auto& r : rankings) {
    std::vector<std::size_t> relevant_positions;
    for (std::size_t j = 0; j < r.ranked_identities.size(); ++j)
      if (r.ranked_identities[j] == r.probe_identity) relevant_positions.push_back(j + 1);
    double ap = 0.0;
    for (std::size_t i = 0; i < relevant_positions.size(); ++i) {
      std::size_t in_top = 0;
      for (std::size_t pos : relevant_positions)
        if (pos <= relevant_positions[i]) ++in_top;
      ap += static_cast<double>(in_top) / static_cast<double>(relevant_positions[i]);
    }
    total += ap / static_cast<double>(relevant_positions.size());
  }
  return total / static_cast<double>(rankings.size());
}

inline hcml::Vec random_vec(std::size_t n, std::mt19937_64& rng, double lo = -5.0,
                            double hi = 5.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  hcml::Vec v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

}  // namespace oracle
