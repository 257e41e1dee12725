#include <CLI11.hpp>

#include "cli/commands.hpp"

using namespace vidpred::cli;

int main(int argc, char** argv) {
  CLI::App app{"vidpred: stochastic video prediction with cycle training"};
  app.require_subcommand(1);

  TrainOptions train;
  auto* t = app.add_subcommand("train", "Train a predictor from a run config");
  t->add_option("--config", train.config_path, "YAML run config")->required()->check(CLI::ExistingFile);
  t->add_option("--out", train.output_dir, "Output directory (overrides output_dir)");
  t->add_option("--seed", train.seed, "Seed (overrides seed)");
  t->add_flag("--deterministic", train.deterministic, "Single-threaded bitwise reproducible run");
  t->add_option("--resume", train.resume, "Checkpoint to continue from");

  RolloutOptions roll;
  auto* r = app.add_subcommand("rollout", "Predict future frames from a seed sequence");
  r->add_option("--checkpoint", roll.checkpoint)->required();
  r->add_option("--input", roll.input_dir, "Directory of numbered seed frames")->required();
  r->add_option("--steps", roll.steps, "Frames to predict")->default_val(10);
  r->add_option("--out", roll.output_dir)->required();
  r->add_flag("--heatmaps", roll.heatmaps, "Write per-pixel variance heatmaps");
  r->add_option("--seed", roll.seed, "Seed for latent sampling")->default_val(0);

  EvaluateOptions eval;
  auto* e = app.add_subcommand("evaluate", "Score a checkpoint on held-out sequences");
  e->add_option("--checkpoint", eval.checkpoint)->required();
  e->add_option("--dataset", eval.dataset_dir, "Directory dataset (default: synthetic held-out)");
  e->add_option("--horizons", eval.horizons, "Rollout horizons for FVD")->delimiter(',');
  e->add_option("--config", eval.config_path, "Run config (default: the one in the checkpoint)");
  e->add_option("--out", eval.output_dir)->required();
  e->add_option("--seed", eval.seed)->default_val(0);

  PlotOptions plot;
  auto* p = app.add_subcommand("plot", "Draw loss, schedule or FVD charts");
  p->add_option("--input", plot.input, "metrics.jsonl or report.json")->required();
  p->add_option("--out", plot.output_dir)->required();

  MakeDatasetOptions make;
  auto* m = app.add_subcommand("make-dataset", "Write synthetic sprite sequences as PNG frames");
  m->add_option("--config", make.config_path);
  m->add_option("--out", make.output_dir)->required();
  m->add_flag("--heldout", make.heldout, "Use the held-out seed and count");

  CLI11_PARSE(app, argc, argv);

  if (t->parsed()) return guarded("train", [&] { return run_train(train); });
  if (r->parsed()) return guarded("rollout", [&] { return run_rollout(roll); });
  if (e->parsed()) return guarded("evaluate", [&] { return run_evaluate(eval); });
  if (p->parsed()) return guarded("plot", [&] { return run_plot(plot); });
  return guarded("make-dataset", [&] { return run_make_dataset(make); });
}
