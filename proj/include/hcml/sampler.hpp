// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <vector>

#include "hcml/linalg.hpp"

namespace hcml {

/// Per-identity sample id pools, one per modality.
struct DatasetIndex {
  // identity -> {modality-1 ids, modality-2 ids}
  std::map<int, std::array<std::vector<int>, 2>> pools;

  std::vector<int> eligible_identities() const {
    std::vector<int> ids;
    for (const auto& [identity, p] : pools)
      if (!p[0].empty() && !p[1].empty()) ids.push_back(identity);
    return ids;
  }
};

/// L identities, T samples per modality per identity, size 2·L·T.
struct MiniBatch {
  std::vector<int> sample_ids;
  std::vector<int> labels;
  std::vector<int> modalities;

  std::size_t size() const { return sample_ids.size(); }
};

namespace detail {

// Uniform draw of `count` elements; without replacement when the pool is large
// enough, with replacement otherwise.
inline std::vector<int> draw_samples(const std::vector<int>& pool, std::size_t count, Rng& rng) {
  std::vector<int> out;
  out.reserve(count);
  if (pool.size() >= count) {
    std::sample(pool.begin(), pool.end(), std::back_inserter(out), count, rng);
  } else {
    std::uniform_int_distribution<std::size_t> dist(0, pool.size() - 1);
    for (std::size_t i = 0; i < count; ++i) out.push_back(pool[dist(rng)]);
  }
  return out;
}

inline std::vector<int> draw_identities(const DatasetIndex& index, std::size_t count, Rng& rng) {
  std::vector<int> ids = index.eligible_identities();
  if (ids.size() < count)
    throw std::invalid_argument("sampler: fewer eligible identities than requested");
  std::vector<int> chosen;
  std::sample(ids.begin(), ids.end(), std::back_inserter(chosen), count, rng);
  std::shuffle(chosen.begin(), chosen.end(), rng);
  return chosen;
}

}  // namespace detail

/// Identity-balanced, modality-balanced batch: L identities drawn without
/// replacement, then T samples per (identity, modality).
inline MiniBatch sample_batch(const DatasetIndex& index, std::size_t l, std::size_t t, Rng& rng) {
  if (l == 0 || t == 0) throw std::invalid_argument("sample_batch: L and T must be positive");
  MiniBatch batch;
  batch.sample_ids.reserve(2 * l * t);
  for (int identity : detail::draw_identities(index, l, rng)) {
    const auto& p = index.pools.at(identity);
    for (int modality : {1, 2}) {
      for (int id : detail::draw_samples(p[modality - 1], t, rng)) {
        batch.sample_ids.push_back(id);
        batch.labels.push_back(identity);
        batch.modalities.push_back(modality);
      }
    }
  }
  return batch;
}

/// Control sampler: identity-balanced pairs drawn from the merged modality
/// pools, so per-identity modality counts are not guaranteed equal.
inline MiniBatch legacy_sample_batch(const DatasetIndex& index, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0 || batch_size % 2 != 0)
    throw std::invalid_argument("legacy_sample_batch: batch size must be even and positive");
  const std::size_t n_identities = batch_size / 2;
  const std::vector<int> eligible = index.eligible_identities();
  if (eligible.empty()) throw std::invalid_argument("legacy_sample_batch: no eligible identities");

  std::vector<int> chosen =
      detail::draw_identities(index, std::min(n_identities, eligible.size()), rng);

  MiniBatch batch;
  batch.sample_ids.reserve(batch_size);
  std::size_t i = 0;
  while (batch.size() < batch_size) {
    const int identity = chosen[i % chosen.size()];
    ++i;
    const auto& p = index.pools.at(identity);
    std::vector<std::pair<int, int>> merged;  // (sample id, modality)
    for (int id : p[0]) merged.emplace_back(id, 1);
    for (int id : p[1]) merged.emplace_back(id, 2);
    std::uniform_int_distribution<std::size_t> dist(0, merged.size() - 1);
    for (int k = 0; k < 2 && batch.size() < batch_size; ++k) {
      const auto& [id, modality] = merged[dist(rng)];
      batch.sample_ids.push_back(id);
      batch.labels.push_back(identity);
      batch.modalities.push_back(modality);
    }
  }
  return batch;
}

}  // namespace hcml
