// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hcml/linalg.hpp"
#include "hcml/sampler.hpp"

namespace hcml {

/// One observation: identity label, modality tag, camera tag, dense feature map.
struct Sample {
  int sample_id = 0;
  int identity = 0;
  int modality = 1;  // 1 = visible, 2 = infrared
  int camera = 0;
  Vec feature_map;  // H*W*C, row-major (h, w, c)
};

struct Dataset {
  int h = 0, w = 0, c = 0;
  std::vector<Sample> samples;

  std::size_t feature_size() const {
    return static_cast<std::size_t>(h) * w * c;
  }

  std::set<int> identities() const {
    std::set<int> ids;
    for (const auto& s : samples) ids.insert(s.identity);
    return ids;
  }
};

/// Synthetic two-modality generator parameters.
struct SynthSpec {
  int n_identities = 32;
  int samples_per_modality = 20;
  int h = 12, w = 4, c = 8;
  double identity_signal_scale = 1.0;
  double modality_gap_scale = 1.0;
  double noise_scale = 0.3;
  bool stripe_structure = true;
  std::vector<int> camera_tags = {1, 2, 3, 4, 5, 6};
  std::uint64_t seed = 42;
};

/// Each sample = identity pattern (modality-shared) + modality offset pattern
/// (identity-shared) + i.i.d. Gaussian noise. With stripe_structure off the
/// identity pattern is constant across rows, so no band carries identity
/// information of its own.
inline Dataset generate(const SynthSpec& spec) {
  if (spec.identity_signal_scale < 0 || spec.modality_gap_scale < 0 || spec.noise_scale < 0)
    throw std::invalid_argument("generate: scales must be non-negative");
  if (spec.camera_tags.empty()) throw std::invalid_argument("generate: empty camera tag list");
  Dataset ds;
  ds.h = spec.h;
  ds.w = spec.w;
  ds.c = spec.c;
  const std::size_t fs = ds.feature_size();
  const std::size_t plane = static_cast<std::size_t>(spec.w) * spec.c;

  Rng rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::array<Vec, 2> modality_offset;
  for (auto& off : modality_offset) {
    off.resize(fs);
    for (double& x : off) x = gauss(rng);
  }

  std::vector<Vec> identity_pattern(spec.n_identities);
  for (auto& pat : identity_pattern) {
    pat.resize(fs);
    if (spec.stripe_structure) {
      for (double& x : pat) x = gauss(rng);
    } else {
      Vec row(plane);
      for (double& x : row) x = gauss(rng);
      for (int r = 0; r < spec.h; ++r)
        std::copy(row.begin(), row.end(), pat.begin() + static_cast<std::size_t>(r) * plane);
    }
  }

  int next_id = 0;
  int camera_cursor = 0;
  for (int identity = 0; identity < spec.n_identities; ++identity) {
    for (int modality = 1; modality <= 2; ++modality) {
      for (int k = 0; k < spec.samples_per_modality; ++k) {
        Sample s;
        s.sample_id = next_id++;
        s.identity = identity;
        s.modality = modality;
        s.camera = spec.camera_tags[camera_cursor++ % spec.camera_tags.size()];
        s.feature_map.resize(fs);
        const Vec& pat = identity_pattern[identity];
        const Vec& off = modality_offset[modality - 1];
        for (std::size_t i = 0; i < fs; ++i)
          s.feature_map[i] = spec.identity_signal_scale * pat[i] +
                             spec.modality_gap_scale * off[i] + spec.noise_scale * gauss(rng);
        ds.samples.push_back(std::move(s));
      }
    }
  }
  return ds;
}

/// Identity-disjoint split; the test side keeps both modalities per identity.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                         std::uint64_t seed) {
  const std::set<int> id_set = ds.identities();
  if (id_set.size() < 2) throw std::invalid_argument("split: need at least 2 identities");
  std::vector<int> ids(id_set.begin(), id_set.end());
  Rng rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  const std::size_t n_train =
      static_cast<std::size_t>(train_fraction * static_cast<double>(ids.size()) + 0.5);
  if (n_train == 0 || n_train >= ids.size())
    throw std::invalid_argument("split: fraction leaves one side empty");

  std::set<int> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  Dataset train, test;
  train.h = test.h = ds.h;
  train.w = test.w = ds.w;
  train.c = test.c = ds.c;
  for (const auto& s : ds.samples)
    (train_ids.count(s.identity) ? train : test).samples.push_back(s);

  for (int identity : test.identities()) {
    bool has1 = false, has2 = false;
    for (const auto& s : test.samples)
      if (s.identity == identity) (s.modality == 1 ? has1 : has2) = true;
    if (!has1 || !has2)
      throw std::invalid_argument("split: test identity " + std::to_string(identity) +
                                  " is missing a modality");
  }
  return {std::move(train), std::move(test)};
}

/// Text format: header `H W C`, then one line per sample:
/// `sample_id identity modality camera v1 ... v(H*W*C)`.
inline void save(const Dataset& ds, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("save: cannot open " + path);
  std::fprintf(f, "%d %d %d\n", ds.h, ds.w, ds.c);
  for (const auto& s : ds.samples) {
    std::fprintf(f, "%d %d %d %d", s.sample_id, s.identity, s.modality, s.camera);
    for (double v : s.feature_map) std::fprintf(f, " %.17g", v);
    std::fputc('\n', f);
  }
  std::fclose(f);
}

inline Dataset load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load: empty file: " + path);

  Dataset ds;
  {
    std::istringstream hs(line);
    if (!(hs >> ds.h >> ds.w >> ds.c) || ds.h <= 0 || ds.w <= 0 || ds.c <= 0)
      throw std::runtime_error("load: malformed header at line 1");
  }
  const std::size_t fs = ds.feature_size();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Sample s;
    if (!(ls >> s.sample_id >> s.identity >> s.modality >> s.camera))
      throw std::runtime_error("load: malformed sample at line " + std::to_string(lineno));
    s.feature_map.reserve(fs);
    double v;
    while (ls >> v) s.feature_map.push_back(v);
    if (s.feature_map.size() != fs)
      throw std::runtime_error("load: feature count mismatch at line " + std::to_string(lineno) +
                               " (got " + std::to_string(s.feature_map.size()) + ", expected " +
                               std::to_string(fs) + ")");
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

/// Sampler index over a dataset; sample ids are positions in ds.samples.
inline DatasetIndex build_index(const Dataset& ds) {
  DatasetIndex index;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& s = ds.samples[i];
    index.pools[s.identity][s.modality - 1].push_back(static_cast<int>(i));
  }
  return index;
}

}  // namespace hcml
