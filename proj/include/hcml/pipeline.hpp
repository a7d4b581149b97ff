// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hcml/checkpoint.hpp"
#include "hcml/config.hpp"
#include "hcml/data.hpp"
#include "hcml/eval.hpp"
#include "hcml/trainer.hpp"

namespace hcml {

inline void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("write_history_csv: cannot open " + path);
  std::fprintf(f, "step,epoch,ce,hc,total,lr\n");
  for (const auto& s : history.steps)
    std::fprintf(f, "%d,%d,%.17g,%.17g,%.17g,%.17g\n", s.step, s.epoch, s.ce, s.hc, s.total,
                 s.lr);
  std::fclose(f);
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["cmc"] = report.cmc;
  j["map"] = report.map;
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : report.trials)
    trials.push_back({{"cmc", t.cmc}, {"map", t.map}, {"rank1", t.rank1}});
  j["trials"] = std::move(trials);
  j["mean"] = {{"rank1", report.mean_rank1}, {"map", report.mean_map}};
  j["std"] = {{"rank1", report.std_rank1}, {"map", report.std_map}};
  return j;
}

inline void write_report_json(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_report_json: cannot open " + path);
  out << report_to_json(report).dump(2) << "\n";
}

inline void write_embeddings_csv(const Dataset& ds, const std::vector<std::size_t>& indices,
                                 const std::vector<std::array<double, 2>>& coords,
                                 const std::string& path) {
  if (indices.size() != coords.size())
    throw std::invalid_argument("write_embeddings_csv: size mismatch");
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("write_embeddings_csv: cannot open " + path);
  std::fprintf(f, "sample_id,identity,modality,x,y\n");
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Sample& s = ds.samples[indices[i]];
    std::fprintf(f, "%d,%d,%d,%.17g,%.17g\n", s.sample_id, s.identity, s.modality, coords[i][0],
                 coords[i][1]);
  }
  std::fclose(f);
}

/// Generates the synthetic dataset and writes the dataset file.
inline Dataset run_gen(const RunConfig& cfg, const std::string& out_path) {
  const auto parent = std::filesystem::path(out_path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    throw std::runtime_error("run_gen: output directory does not exist: " + parent.string());
  Dataset ds = generate(cfg.data);
  save(ds, out_path);
  return ds;
}

struct TrainOutputs {
  ModelConfig model_cfg;  // with n_classes resolved from the train split
  TrainResult result;
  Dataset train_set;
  Dataset test_set;
};

/// Splits identity-disjoint, trains, writes checkpoint + history + the
/// effective config.
/// The model's input shape always follows the dataset header.
inline ModelConfig model_config_for(const RunConfig& cfg, const Dataset& ds) {
  ModelConfig mc = cfg.model;
  mc.h = ds.h;
  mc.w = ds.w;
  mc.c = ds.c;
  return mc;
}

inline TrainOutputs run_train(const RunConfig& cfg, const Dataset& ds,
                              const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto [train_set, test_set] = split(ds, cfg.train_fraction, cfg.seed);

  TrainOutputs out;
  out.result = train(model_config_for(cfg, ds), cfg.train, train_set, &test_set);
  out.model_cfg = model_config_for(cfg, ds);
  out.model_cfg.n_classes = static_cast<int>(out.result.class_remap.size());
  out.train_set = std::move(train_set);
  out.test_set = std::move(test_set);

  save_checkpoint(out_dir + "/checkpoint.json", out.model_cfg, out.result.params);
  write_history_csv(out.result.history, out_dir + "/history.csv");
  save_run_config(cfg, out_dir + "/config.ini");
  return out;
}

/// Evaluates a checkpoint on the test split and writes report.json; optionally
/// also writes the 2-D embedding CSV for all test descriptors.
inline EvalReport run_eval(const RunConfig& cfg, const ModelConfig& model_cfg,
                           const ModelParams& params, const Dataset& test_set,
                           const std::string& out_dir, bool project2d = false) {
  std::filesystem::create_directories(out_dir);
  EvalReport report = evaluate(params, model_cfg, test_set, cfg.eval);
  write_report_json(report, out_dir + "/report.json");
  if (project2d) {
    std::vector<std::size_t> indices(test_set.samples.size());
    std::vector<Vec> descs;
    descs.reserve(test_set.samples.size());
    for (std::size_t i = 0; i < test_set.samples.size(); ++i) {
      indices[i] = i;
      const Sample& s = test_set.samples[i];
      descs.push_back(extract_descriptor(params, model_cfg, s.feature_map, s.modality));
    }
    write_embeddings_csv(test_set, indices, project_2d(descs), out_dir + "/embeddings.csv");
  }
  return report;
}

struct SweepRow {
  std::string value;
  double rank1 = std::numeric_limits<double>::quiet_NaN();
  double map = std::numeric_limits<double>::quiet_NaN();
  double center_distance = std::numeric_limits<double>::quiet_NaN();
  std::string error;  // empty on success
};

inline RunConfig apply_sweep_value(const RunConfig& base, const std::string& axis,
                                   const std::string& value) {
  RunConfig cfg = base;
  if (axis == "lambda") {
    cfg.train.hc.lambda = std::stod(value);
  } else if (axis == "T") {
    cfg.train.t = std::stoi(value);
  } else if (axis == "alpha") {
    cfg.train.hc.margin_alpha = std::stod(value);
  } else if (axis == "p") {
    cfg.model.p = std::stoi(value);
  } else if (axis == "metric") {
    cfg.train.hc.metric = detail::metric_from(value);
  } else if (axis == "sampler") {
    cfg.train.sampler_kind = detail::sampler_from(value);
    cfg.train.hc.lambda = 0.0;  // CE-only comparison; legacy batches may lack a modality
  } else if (axis == "constraint") {
    cfg.train.hc.constraint = detail::constraint_from(value);
  } else if (axis == "loss") {
    cfg.train.loss_kind = detail::loss_from(value);
  } else {
    throw std::invalid_argument("sweep: unknown axis '" + axis + "'");
  }
  return cfg;
}

/// One full train+eval per swept value, shared dataset and seed, results as a
/// CSV table. Failed runs get a row with NaNs and the sweep continues.
inline std::vector<SweepRow> run_sweep(const RunConfig& base, const Dataset& ds,
                                       const std::string& axis,
                                       const std::vector<std::string>& values,
                                       const std::string& out_dir, int jobs = 1) {
  std::filesystem::create_directories(out_dir);
  std::vector<SweepRow> rows(values.size());

  auto run_one = [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.value = values[i];
    try {
      const RunConfig cfg = apply_sweep_value(base, axis, values[i]);
      auto [train_set, test_set] = split(ds, cfg.train_fraction, cfg.seed);
      TrainResult tr = train(model_config_for(cfg, ds), cfg.train, train_set, nullptr);
      ModelConfig model_cfg = model_config_for(cfg, ds);
      model_cfg.n_classes = static_cast<int>(tr.class_remap.size());
      const EvalReport report = evaluate(tr.params, model_cfg, test_set, cfg.eval);
      row.rank1 = report.mean_rank1;
      row.map = report.mean_map;
      row.center_distance = center_distance_probe(tr.params, model_cfg, test_set);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < values.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> workers;
    std::mutex mu;
    std::size_t next = 0;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= values.size()) return;
            i = next++;
          }
          run_one(i);
        }
      });
    }
    for (auto& t : workers) t.join();
  }

  std::FILE* f = std::fopen((out_dir + "/sweep.csv").c_str(), "w");
  if (!f) throw std::runtime_error("run_sweep: cannot open sweep.csv");
  std::fprintf(f, "value,rank1,map,center_distance\n");
  for (const auto& r : rows)
    std::fprintf(f, "%s,%.17g,%.17g,%.17g\n", r.value.c_str(), r.rank1, r.map,
                 r.center_distance);
  std::fclose(f);
  return rows;
}

}  // namespace hcml
