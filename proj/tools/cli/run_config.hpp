#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vidpred/data.hpp"
#include "vidpred/features.hpp"
#include "vidpred/predictor.hpp"
#include "vidpred/training.hpp"

namespace vidpred::cli {

struct DatasetSection {
  std::string type = "synthetic";  // "synthetic" or "directory"
  std::string path;                // root for "directory"
  SyntheticSpec synthetic;
  /// Held-out synthetic sequences used by `evaluate` when no directory is given.
  uint64_t heldout_seed = 1000;
  int64_t heldout_sequences = 8;
  TransformSpec transform;
  /// 0 derives n + max_self_fed_steps + 1.
  int64_t window_length = 0;

  bool operator==(const DatasetSection&) const = default;
};

struct MetricsSection {
  std::vector<int64_t> horizons = {10, 50};
  VideoEmbedderSpec embedder;

  bool operator==(const MetricsSection&) const = default;
};

/// Full declarative description of an experiment.
struct RunConfig {
  PredictorConfig predictor;
  TrainConfig train;
  TapSpec features;
  DatasetSection dataset;
  MetricsSection metrics;
  std::string output_dir = "runs/default";
  uint64_t seed = 0;
  bool deterministic = true;

  /// Window length the dataset must provide for this config.
  int64_t resolved_window_length() const;
  /// Semantic checks plus existence of every referenced path.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

/// Parses YAML text. Unknown keys and type errors raise ConfigError with a
/// "<source>:<line>:" prefix.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& cfg);

}  // namespace vidpred::cli
