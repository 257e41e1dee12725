#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "vidpred/data.hpp"
#include "vidpred/features.hpp"
#include "vidpred/losses.hpp"
#include "vidpred/predictor.hpp"

namespace vidpred {

enum class Ramp { StepwiseLinear };

/// Maps training progress to the number of self-fed prediction steps.
struct CycleSchedule {
  bool enabled = true;
  double start_fraction = 0.5;
  /// 0 resolves to input_frames + 1.
  int64_t max_self_fed_steps = 0;
  Ramp ramp = Ramp::StepwiseLinear;

  void validate() const;
  CycleSchedule resolved(int64_t input_frames) const;
  bool operator==(const CycleSchedule&) const = default;
};

/// 0 while epoch / total_epochs < start_fraction; afterwards a stepwise-linear
/// ramp from 1 at the first cycle epoch to max_self_fed_steps at the last epoch:
///   1 + ceil((epoch - start) * (max - 1) / (last - start))
/// The schedule must be resolved (max_self_fed_steps > 0) unless disabled.
int64_t cycle_steps_for_epoch(const CycleSchedule& schedule, int64_t epoch,
                              int64_t total_epochs);

struct OptimizerConfig {
  std::string name = "adam";  // "adam" or "sgd"
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double momentum = 0.0;  // sgd only

  bool operator==(const OptimizerConfig&) const = default;
};

struct TrainConfig {
  int64_t epochs = 200;
  int64_t batch_size = 8;
  /// Random windows drawn from every sequence per epoch.
  int64_t windows_per_sequence = 1;
  OptimizerConfig optimizer;
  LossWeights loss;
  CycleSchedule schedule;
  uint64_t seed = 0;
  /// Write a checkpoint every this many epochs; the final epoch is always written.
  int64_t checkpoint_every = 0;
  /// Single-threaded, per-epoch seeded execution that is bitwise reproducible.
  bool deterministic = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

std::unique_ptr<torch::optim::Optimizer> make_optimizer(Predictor& model,
                                                        const OptimizerConfig& cfg);

/// Scalar copies of the loss terms.
struct LossValues {
  double total = 0.0;
  double reconstruction = 0.0;
  double perceptual = 0.0;
  double latent_kl = 0.0;

  LossValues& operator+=(const LossValues& o);
  LossValues operator/(double d) const;
  bool operator==(const LossValues&) const = default;
};

LossValues to_values(const LossBreakdown& b);

struct CycleStep {
  LossBreakdown loss;
  Prediction prediction;
  /// The n input frames for this step; detached copies of earlier predictions
  /// occupy the newest slots.
  torch::Tensor inputs;
  /// Per input slot (oldest first): true when the frame is a fed-back prediction.
  std::vector<bool> self_fed;
};

/// Invoked after each prediction of a cycle, e.g. to backpropagate it.
using StepCallback = std::function<void(int64_t step, CycleStep& step_data)>;

/// Runs the s + 1 predictions of one cycle-training window without updating
/// parameters. window: B x L x C x H x W with L >= n + s + 1. Step 0 sees real
/// frames; every later step has the previous predicted mean, detached from the
/// graph, appended as its newest input. Steps therefore share no gradient path.
std::vector<CycleStep> cycle_forward(Predictor& model, const torch::Tensor& window,
                                     int64_t self_fed_steps, const LossWeights& weights,
                                     const FeatureExtractor* features,
                                     const StepCallback& on_step = {});

struct StepReport {
  LossValues mean;
  std::vector<LossValues> per_step;
  std::vector<std::vector<bool>> self_fed;
};

/// One parameter update from the mean of the s + 1 step losses.
StepReport training_step(Predictor& model, torch::optim::Optimizer& optimizer,
                         const torch::Tensor& window, int64_t self_fed_steps,
                         const LossWeights& weights, const FeatureExtractor* features);

struct EpochLog {
  int64_t epoch = 0;
  int64_t self_fed_steps = 0;
  LossValues losses;
  int64_t windows = 0;
  std::optional<double> wall_time_s;

  bool operator==(const EpochLog&) const = default;
};

/// One JSON object per line; wall time is null in deterministic mode.
std::string epoch_log_to_json(const EpochLog& row);
EpochLog epoch_log_from_json(const std::string& line);
std::vector<EpochLog> read_metric_log(const std::string& path);

struct FitOptions {
  /// Output directory for checkpoints/ and metrics.jsonl; empty writes nothing.
  std::string output_dir;
  /// Checkpoint to continue from.
  std::string resume_from;
  /// Stored inside every checkpoint.
  std::string run_config_text;
  std::function<void(const EpochLog&)> on_epoch;
};

struct FitResult {
  std::vector<EpochLog> log;
  std::vector<std::string> checkpoints;
};

/// Epoch loop with the cycle curriculum. Checks at startup that the dataset
/// windows are long enough for the largest scheduled self-fed step count.
FitResult fit(Predictor& model, const SequenceDataset& dataset, const TrainConfig& config,
              const FeatureExtractor* features, const FitOptions& options = {});

std::string checkpoint_name(int64_t epoch);

}  // namespace vidpred
