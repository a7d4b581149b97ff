// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "hcml/data.hpp"
#include "hcml/eval.hpp"
#include "hcml/network.hpp"
#include "hcml/trainer.hpp"

namespace hcml {

/// Flat INI-style key/value text with [section] headers.
using IniDoc = std::map<std::string, std::map<std::string, std::string>>;

inline IniDoc ini_parse(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ini_parse: cannot open " + path);
  IniDoc doc;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("ini_parse: bad section at line " + std::to_string(lineno));
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("ini_parse: missing '=' at line " + std::to_string(lineno));
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    const auto vstart = value.find_first_not_of(" \t");
    value = vstart == std::string::npos ? "" : value.substr(vstart);
    doc[section][key] = value;
  }
  return doc;
}

inline void ini_write(const IniDoc& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("ini_write: cannot open " + path);
  for (const auto& [section, entries] : doc) {
    out << "[" << section << "]\n";
    for (const auto& [key, value] : entries) out << key << " = " << value << "\n";
    out << "\n";
  }
}

/// Everything one run needs: data spec, model shape, training schedule,
/// evaluation protocol, output directory, global seed.
struct RunConfig {
  SynthSpec data;
  ModelConfig model;
  TrainConfig train;
  EvalProtocol eval;
  double train_fraction = 0.75;
  std::string out_dir = "out";
  std::uint64_t seed = 42;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string metric_name(Metric m) {
  return m == Metric::SquaredEuclidean ? "squared-euclidean" : "cosine";
}
inline Metric metric_from(const std::string& s) {
  if (s == "squared-euclidean" || s == "euclidean") return Metric::SquaredEuclidean;
  if (s == "cosine") return Metric::Cosine;
  throw std::runtime_error("config: unknown metric '" + s + "'");
}
inline std::string constraint_name(Constraint c) {
  return c == Constraint::Weak ? "weak" : "strong";
}
inline Constraint constraint_from(const std::string& s) {
  if (s == "weak") return Constraint::Weak;
  if (s == "strong") return Constraint::Strong;
  throw std::runtime_error("config: unknown constraint '" + s + "'");
}
inline std::string loss_name(LossKind k) { return k == LossKind::HeteroCenter ? "hc" : "center"; }
inline LossKind loss_from(const std::string& s) {
  if (s == "hc") return LossKind::HeteroCenter;
  if (s == "center") return LossKind::Center;
  throw std::runtime_error("config: unknown loss '" + s + "'");
}
inline std::string sampler_name(SamplerKind k) {
  return k == SamplerKind::IdentityModalityBalanced ? "pk" : "legacy";
}
inline SamplerKind sampler_from(const std::string& s) {
  if (s == "pk") return SamplerKind::IdentityModalityBalanced;
  if (s == "legacy") return SamplerKind::Legacy;
  throw std::runtime_error("config: unknown sampler '" + s + "'");
}

inline std::string join_ints(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(xs[i]);
  }
  return s;
}
inline std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  return out;
}

}  // namespace detail

inline IniDoc run_config_to_ini(const RunConfig& cfg) {
  using detail::fmt_double;
  IniDoc doc;
  auto& data = doc["data"];
  data["n_identities"] = std::to_string(cfg.data.n_identities);
  data["samples_per_modality"] = std::to_string(cfg.data.samples_per_modality);
  data["h"] = std::to_string(cfg.data.h);
  data["w"] = std::to_string(cfg.data.w);
  data["c"] = std::to_string(cfg.data.c);
  data["identity_signal_scale"] = fmt_double(cfg.data.identity_signal_scale);
  data["modality_gap_scale"] = fmt_double(cfg.data.modality_gap_scale);
  data["noise_scale"] = fmt_double(cfg.data.noise_scale);
  data["stripe_structure"] = cfg.data.stripe_structure ? "true" : "false";
  data["camera_tags"] = detail::join_ints(cfg.data.camera_tags);
  data["train_fraction"] = fmt_double(cfg.train_fraction);

  auto& model = doc["model"];
  model["p"] = std::to_string(cfg.model.p);
  model["branch_hidden"] = std::to_string(cfg.model.branch_hidden);
  model["embed_dim"] = std::to_string(cfg.model.embed_dim);
  model["leaky_slope"] = fmt_double(cfg.model.leaky_slope);

  auto& train = doc["train"];
  train["epochs"] = std::to_string(cfg.train.epochs);
  train["batches_per_epoch"] = std::to_string(cfg.train.batches_per_epoch);
  train["L"] = std::to_string(cfg.train.l);
  train["T"] = std::to_string(cfg.train.t);
  train["lambda"] = fmt_double(cfg.train.hc.lambda);
  train["metric"] = detail::metric_name(cfg.train.hc.metric);
  train["margin_alpha"] = fmt_double(cfg.train.hc.margin_alpha);
  train["constraint"] = detail::constraint_name(cfg.train.hc.constraint);
  train["loss"] = detail::loss_name(cfg.train.loss_kind);
  train["center_lr"] = fmt_double(cfg.train.center_lr);
  train["sampler"] = detail::sampler_name(cfg.train.sampler_kind);
  train["lr_initial"] = fmt_double(cfg.train.lr_initial);
  train["lr_after_decay"] = fmt_double(cfg.train.lr_after_decay);
  train["decay_epoch"] = std::to_string(cfg.train.decay_epoch);
  train["momentum"] = fmt_double(cfg.train.momentum);

  auto& eval = doc["eval"];
  eval["shot"] = std::to_string(cfg.eval.shot);
  eval["trials"] = std::to_string(cfg.eval.trials);
  eval["probe_modality"] = std::to_string(cfg.eval.probe_modality);
  {
    std::string pairs;
    for (const auto& [a, b] : cfg.eval.exclusion_pairs) {
      if (!pairs.empty()) pairs += ",";
      pairs += std::to_string(a) + ":" + std::to_string(b);
    }
    eval["exclusion_pairs"] = pairs;
  }
  eval["gallery_cameras"] =
      cfg.eval.gallery_camera_filter
          ? detail::join_ints({cfg.eval.gallery_camera_filter->begin(),
                               cfg.eval.gallery_camera_filter->end()})
          : "";

  auto& run = doc["run"];
  run["seed"] = std::to_string(cfg.seed);
  run["out"] = cfg.out_dir;
  return doc;
}

inline RunConfig run_config_from_ini(const IniDoc& doc) {
  RunConfig cfg;
  auto get = [&](const std::string& section, const std::string& key) -> const std::string* {
    auto sit = doc.find(section);
    if (sit == doc.end()) return nullptr;
    auto kit = sit->second.find(key);
    return kit == sit->second.end() ? nullptr : &kit->second;
  };
  auto set_int = [&](const std::string& s, const std::string& k, int& dst) {
    if (const auto* v = get(s, k)) dst = std::stoi(*v);
  };
  auto set_dbl = [&](const std::string& s, const std::string& k, double& dst) {
    if (const auto* v = get(s, k)) dst = std::stod(*v);
  };

  set_int("data", "n_identities", cfg.data.n_identities);
  set_int("data", "samples_per_modality", cfg.data.samples_per_modality);
  set_int("data", "h", cfg.data.h);
  set_int("data", "w", cfg.data.w);
  set_int("data", "c", cfg.data.c);
  set_dbl("data", "identity_signal_scale", cfg.data.identity_signal_scale);
  set_dbl("data", "modality_gap_scale", cfg.data.modality_gap_scale);
  set_dbl("data", "noise_scale", cfg.data.noise_scale);
  if (const auto* v = get("data", "stripe_structure")) cfg.data.stripe_structure = *v == "true";
  if (const auto* v = get("data", "camera_tags")) cfg.data.camera_tags = detail::split_ints(*v);
  set_dbl("data", "train_fraction", cfg.train_fraction);

  set_int("model", "p", cfg.model.p);
  set_int("model", "branch_hidden", cfg.model.branch_hidden);
  set_int("model", "embed_dim", cfg.model.embed_dim);
  set_dbl("model", "leaky_slope", cfg.model.leaky_slope);

  set_int("train", "epochs", cfg.train.epochs);
  set_int("train", "batches_per_epoch", cfg.train.batches_per_epoch);
  set_int("train", "L", cfg.train.l);
  set_int("train", "T", cfg.train.t);
  set_dbl("train", "lambda", cfg.train.hc.lambda);
  if (const auto* v = get("train", "metric")) cfg.train.hc.metric = detail::metric_from(*v);
  set_dbl("train", "margin_alpha", cfg.train.hc.margin_alpha);
  if (const auto* v = get("train", "constraint"))
    cfg.train.hc.constraint = detail::constraint_from(*v);
  if (const auto* v = get("train", "loss")) cfg.train.loss_kind = detail::loss_from(*v);
  set_dbl("train", "center_lr", cfg.train.center_lr);
  if (const auto* v = get("train", "sampler")) cfg.train.sampler_kind = detail::sampler_from(*v);
  set_dbl("train", "lr_initial", cfg.train.lr_initial);
  set_dbl("train", "lr_after_decay", cfg.train.lr_after_decay);
  set_int("train", "decay_epoch", cfg.train.decay_epoch);
  set_dbl("train", "momentum", cfg.train.momentum);

  set_int("eval", "shot", cfg.eval.shot);
  set_int("eval", "trials", cfg.eval.trials);
  set_int("eval", "probe_modality", cfg.eval.probe_modality);
  if (const auto* v = get("eval", "exclusion_pairs")) {
    cfg.eval.exclusion_pairs.clear();
    std::istringstream in(*v);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos)
        throw std::runtime_error("config: exclusion pair must be probe:gallery");
      cfg.eval.exclusion_pairs.emplace_back(std::stoi(tok.substr(0, colon)),
                                            std::stoi(tok.substr(colon + 1)));
    }
  }
  if (const auto* v = get("eval", "gallery_cameras")) {
    if (v->empty()) {
      cfg.eval.gallery_camera_filter.reset();
    } else {
      const auto ids = detail::split_ints(*v);
      cfg.eval.gallery_camera_filter = std::set<int>(ids.begin(), ids.end());
    }
  }

  if (const auto* v = get("run", "seed")) cfg.seed = std::stoull(*v);
  if (const auto* v = get("run", "out")) cfg.out_dir = *v;

  // One global seed feeds the per-stage seeds unless a stage overrides it.
  cfg.data.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  cfg.eval.seed = cfg.seed;
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  return run_config_from_ini(ini_parse(path));
}

inline void save_run_config(const RunConfig& cfg, const std::string& path) {
  ini_write(run_config_to_ini(cfg), path);
}

}  // namespace hcml
