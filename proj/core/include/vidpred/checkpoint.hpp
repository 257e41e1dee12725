#pragma once

#include <cstdint>
#include <string>

#include <torch/torch.h>

#include "vidpred/predictor.hpp"

namespace vidpred {

struct TrainingProgress {
  int64_t epoch = -1;  // last completed epoch, -1 before training
  int64_t total_epochs = 0;
  uint64_t seed = 0;

  bool operator==(const TrainingProgress&) const = default;
};

struct Checkpoint {
  PredictorConfig config;
  TrainingProgress progress;
  /// Resolved run configuration text the checkpoint was trained with (may be empty).
  std::string run_config;
};

std::string predictor_config_to_json(const PredictorConfig& cfg);
PredictorConfig predictor_config_from_json(const std::string& text);

/// Writes model weights, config and progress; optimizer state when given.
void save_checkpoint(const std::string& path, Predictor& model, const Checkpoint& meta,
                     torch::optim::Optimizer* optimizer = nullptr);

/// Reads only the metadata records.
Checkpoint read_checkpoint_meta(const std::string& path);

/// Builds a predictor from the stored config and loads every weight, checking
/// each shape against the config. Use load_checkpoint_into to also restore
/// optimizer state.
Predictor load_checkpoint(const std::string& path, Checkpoint* meta = nullptr);

/// Loads weights (and optimizer state) into an existing model whose config must
/// match the stored one.
Checkpoint load_checkpoint_into(const std::string& path, Predictor& model,
                                torch::optim::Optimizer* optimizer = nullptr);

}  // namespace vidpred
