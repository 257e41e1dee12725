#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace vidpred::cli {

struct TrainOptions {
  std::string config_path;
  std::optional<std::string> output_dir;
  std::optional<uint64_t> seed;
  bool deterministic = false;  // forces deterministic mode when set
  std::optional<std::string> resume;
};

struct RolloutOptions {
  std::string checkpoint;
  std::string input_dir;
  int64_t steps = 10;
  std::string output_dir;
  bool heatmaps = false;
  uint64_t seed = 0;
};

struct EvaluateOptions {
  std::string checkpoint;
  std::optional<std::string> dataset_dir;
  std::vector<int64_t> horizons;  // empty: use the run config
  std::string output_dir;
  std::optional<std::string> config_path;  // overrides the config stored in the checkpoint
  uint64_t seed = 0;
};

struct PlotOptions {
  std::string input;  // metrics.jsonl or report.json
  std::string output_dir;
};

struct MakeDatasetOptions {
  std::string config_path;  // optional; synthetic section is used
  std::string output_dir;
  bool heldout = false;
};

int run_train(const TrainOptions& opts);
int run_rollout(const RolloutOptions& opts);
int run_evaluate(const EvaluateOptions& opts);
int run_plot(const PlotOptions& opts);
int run_make_dataset(const MakeDatasetOptions& opts);

/// Runs `body` and maps library exceptions to exit codes:
/// 2 configuration, 3 I/O, 4 numerical, 1 anything else.
int guarded(const char* command, const std::function<int()>& body);

}  // namespace vidpred::cli
