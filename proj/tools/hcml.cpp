// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synthetic data generation, training, retrieval
// evaluation, and ablation sweeps over a shared config file.

#include <chrono>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hcml/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Config file (INI)");
  cmd->add_option("--seed", flags.seed, "Global seed override");
  cmd->add_option("--out", flags.out_dir, "Output directory");
  cmd->add_option("--jobs", flags.jobs, "Parallel sweep runs")->check(CLI::PositiveNumber);
}

hcml::RunConfig effective_config(const CommonFlags& flags) {
  hcml::RunConfig cfg;
  if (!flags.config_path.empty()) cfg = hcml::load_run_config(flags.config_path);
  if (flags.seed) {
    cfg.seed = *flags.seed;
    cfg.data.seed = *flags.seed;
    cfg.train.seed = *flags.seed;
    cfg.eval.seed = *flags.seed;
  }
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  return cfg;
}

hcml::Dataset load_or_generate(const hcml::RunConfig& cfg, const std::string& dataset_path) {
  if (!dataset_path.empty()) return hcml::load(dataset_path);
  return hcml::generate(cfg.data);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modality metric learning toolkit"};
  app.require_subcommand(1);

  CommonFlags gen_flags, train_flags, eval_flags, sweep_flags, export_flags;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic two-modality dataset");
  add_common(gen, gen_flags);
  std::string gen_out = "dataset.txt";
  gen->add_option("--dataset", gen_out, "Output dataset file");

  auto* train = app.add_subcommand("train", "Train a model and write checkpoint + history");
  add_common(train, train_flags);
  std::string train_dataset;
  std::optional<double> flag_lambda, flag_alpha;
  std::optional<int> flag_t, flag_l, flag_p, flag_epochs;
  std::optional<std::string> flag_loss, flag_metric, flag_constraint, flag_sampler;
  train->add_option("--dataset", train_dataset, "Dataset file (generated in memory if omitted)");
  train->add_option("--lambda", flag_lambda, "HC loss weight");
  train->add_option("--alpha", flag_alpha, "Margin alpha");
  train->add_option("--T", flag_t, "Samples per modality per identity");
  train->add_option("--L", flag_l, "Identities per batch");
  train->add_option("--p", flag_p, "Stripe count");
  train->add_option("--epochs", flag_epochs, "Training epochs");
  train->add_option("--loss", flag_loss, "Loss variant: hc | center");
  train->add_option("--metric", flag_metric, "HC metric: squared-euclidean | cosine");
  train->add_option("--constraint", flag_constraint, "HC constraint: weak | strong");
  train->add_option("--sampler", flag_sampler, "Batch sampler: pk | legacy");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (CMC/mAP report)");
  add_common(eval, eval_flags);
  std::string eval_checkpoint, eval_dataset, eval_shot;
  std::optional<int> flag_trials;
  bool flag_project2d = false;
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  eval->add_option("--dataset", eval_dataset, "Dataset file");
  eval->add_option("--shot", eval_shot, "single | multi | an explicit count");
  eval->add_option("--trials", flag_trials, "Number of gallery draws");
  eval->add_flag("--project2d", flag_project2d, "Also write 2-D embedding CSV");

  auto* sweep = app.add_subcommand("sweep", "Train+eval across one swept knob");
  add_common(sweep, sweep_flags);
  std::string sweep_axis, sweep_dataset;
  std::vector<std::string> sweep_values;
  sweep->add_option("--axis", sweep_axis,
                    "lambda | T | alpha | p | metric | sampler | constraint | loss")
      ->required();
  sweep->add_option("--values", sweep_values, "Values for the swept axis")->required();
  sweep->add_option("--dataset", sweep_dataset, "Dataset file");

  auto* exp = app.add_subcommand("export-embeddings", "2-D projection of test descriptors");
  add_common(exp, export_flags);
  std::string exp_checkpoint, exp_dataset;
  exp->add_option("--checkpoint", exp_checkpoint, "Checkpoint file")->required();
  exp->add_option("--dataset", exp_dataset, "Dataset file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const hcml::RunConfig cfg = effective_config(gen_flags);
      const hcml::Dataset ds = hcml::run_gen(cfg, gen_out);
      std::printf("wrote %zu samples (%d identities, %dx%dx%d) to %s\n", ds.samples.size(),
                  cfg.data.n_identities, ds.h, ds.w, ds.c, gen_out.c_str());
    } else if (train->parsed()) {
      hcml::RunConfig cfg = effective_config(train_flags);
      if (flag_lambda) cfg.train.hc.lambda = *flag_lambda;
      if (flag_alpha) cfg.train.hc.margin_alpha = *flag_alpha;
      if (flag_t) cfg.train.t = *flag_t;
      if (flag_l) cfg.train.l = *flag_l;
      if (flag_p) cfg.model.p = *flag_p;
      if (flag_epochs) {
        cfg.train.epochs = *flag_epochs;
        // Shortening the run must not leave the decay point past the end.
        if (cfg.train.decay_epoch > cfg.train.epochs) cfg.train.decay_epoch = cfg.train.epochs;
      }
      if (flag_loss) cfg.train.loss_kind = hcml::detail::loss_from(*flag_loss);
      if (flag_metric) cfg.train.hc.metric = hcml::detail::metric_from(*flag_metric);
      if (flag_constraint) cfg.train.hc.constraint = hcml::detail::constraint_from(*flag_constraint);
      if (flag_sampler) cfg.train.sampler_kind = hcml::detail::sampler_from(*flag_sampler);

      const hcml::Dataset ds = load_or_generate(cfg, train_dataset);
      const auto t0 = std::chrono::steady_clock::now();
      const hcml::TrainOutputs out = hcml::run_train(cfg, ds, cfg.out_dir);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const auto& last = out.result.history.epochs.back();
      std::printf("trained %d epochs in %.1fs: ce=%.4f hc=%.4f total=%.4f\n",
                  cfg.train.epochs, secs, last.mean_ce, last.mean_hc, last.mean_total);
    } else if (eval->parsed()) {
      hcml::RunConfig cfg = effective_config(eval_flags);
      if (!eval_shot.empty()) {
        if (eval_shot == "single")
          cfg.eval.shot = 1;
        else if (eval_shot == "multi")
          cfg.eval.shot = 10;
        else
          cfg.eval.shot = std::stoi(eval_shot);
      }
      if (flag_trials) cfg.eval.trials = *flag_trials;
      auto [model_cfg, params] = hcml::load_checkpoint(eval_checkpoint);
      const hcml::Dataset ds = load_or_generate(cfg, eval_dataset);
      auto [train_set, test_set] = hcml::split(ds, cfg.train_fraction, cfg.seed);
      const hcml::EvalReport report =
          hcml::run_eval(cfg, model_cfg, params, test_set, cfg.out_dir, flag_project2d);
      std::printf("rank1=%.4f (±%.4f) mAP=%.4f (±%.4f) over %d trials\n", report.mean_rank1,
                  report.std_rank1, report.mean_map, report.std_map, cfg.eval.trials);
    } else if (sweep->parsed()) {
      const hcml::RunConfig cfg = effective_config(sweep_flags);
      const hcml::Dataset ds = load_or_generate(cfg, sweep_dataset);
      const auto rows =
          hcml::run_sweep(cfg, ds, sweep_axis, sweep_values, cfg.out_dir, sweep_flags.jobs);
      bool ok = true;
      for (const auto& r : rows) {
        if (r.error.empty()) {
          std::printf("%s=%s rank1=%.4f map=%.4f center_dist=%.4f\n", sweep_axis.c_str(),
                      r.value.c_str(), r.rank1, r.map, r.center_distance);
        } else {
          std::printf("%s=%s FAILED: %s\n", sweep_axis.c_str(), r.value.c_str(),
                      r.error.c_str());
          ok = false;
        }
      }
      if (!ok) return 1;
    } else if (exp->parsed()) {
      const hcml::RunConfig cfg = effective_config(export_flags);
      auto [model_cfg, params] = hcml::load_checkpoint(exp_checkpoint);
      const hcml::Dataset ds = load_or_generate(cfg, exp_dataset);
      auto [train_set, test_set] = hcml::split(ds, cfg.train_fraction, cfg.seed);
      std::filesystem::create_directories(cfg.out_dir);
      std::vector<std::size_t> indices(test_set.samples.size());
      std::vector<hcml::Vec> descs;
      for (std::size_t i = 0; i < test_set.samples.size(); ++i) {
        indices[i] = i;
        const auto& s = test_set.samples[i];
        descs.push_back(hcml::extract_descriptor(params, model_cfg, s.feature_map, s.modality));
      }
      hcml::write_embeddings_csv(test_set, indices, hcml::project_2d(descs),
                                 cfg.out_dir + "/embeddings.csv");
      std::printf("wrote %zu embeddings to %s/embeddings.csv\n", descs.size(),
                  cfg.out_dir.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
