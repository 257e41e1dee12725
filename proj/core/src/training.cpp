#include "vidpred/training.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vidpred/checkpoint.hpp"
#include "vidpred/errors.hpp"

namespace vidpred {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

struct PlannedWindow {
  size_t sequence;
  int64_t start;
  uint64_t salt;
};

torch::Tensor scalar_zero(const torch::Tensor& like) {
  return torch::zeros({}, like.options());
}

}  // namespace

void CycleSchedule::validate() const {
  if (!(start_fraction >= 0.0 && start_fraction <= 1.0)) {
    throw ConfigError("schedule.start_fraction must lie in [0, 1]");
  }
  if (max_self_fed_steps < 0) {
    throw ConfigError("schedule.max_self_fed_steps must be >= 0 (0 means n + 1)");
  }
}

CycleSchedule CycleSchedule::resolved(int64_t input_frames) const {
  CycleSchedule out = *this;
  if (out.max_self_fed_steps == 0) {
    out.max_self_fed_steps = input_frames + 1;
  }
  return out;
}

int64_t cycle_steps_for_epoch(const CycleSchedule& schedule, int64_t epoch,
                              int64_t total_epochs) {
  if (total_epochs < 1 || epoch < 0 || epoch >= total_epochs) {
    throw std::invalid_argument("cycle_steps_for_epoch: epoch " + std::to_string(epoch) +
                                " outside [0, " + std::to_string(total_epochs) + ")");
  }
  schedule.validate();
  if (!schedule.enabled) {
    return 0;
  }
  if (schedule.max_self_fed_steps < 1) {
    throw std::invalid_argument("cycle_steps_for_epoch: schedule is not resolved");
  }
  const int64_t last = total_epochs - 1;
  // first epoch with epoch / total >= start_fraction, never later than the last epoch
  auto start = static_cast<int64_t>(std::ceil(schedule.start_fraction *
                                              static_cast<double>(total_epochs)));
  if (static_cast<double>(start - 1) / static_cast<double>(total_epochs) >=
      schedule.start_fraction) {
    --start;
  }
  start = std::clamp<int64_t>(start, 0, last);
  if (epoch < start) {
    return 0;
  }
  if (last == start) {
    return schedule.max_self_fed_steps;
  }
  const int64_t span = last - start;
  const int64_t num = (epoch - start) * (schedule.max_self_fed_steps - 1);
  return 1 + (num + span - 1) / span;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (windows_per_sequence < 1) throw ConfigError("train.windows_per_sequence must be >= 1");
  if (!(optimizer.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (optimizer.name != "adam" && optimizer.name != "sgd") {
    throw ConfigError("unknown optimizer '" + optimizer.name + "' (expected adam or sgd)");
  }
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  try {
    loss.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("loss: ") + e.what());
  }
  schedule.validate();
}

std::unique_ptr<torch::optim::Optimizer> make_optimizer(Predictor& model,
                                                        const OptimizerConfig& cfg) {
  if (cfg.name == "adam") {
    return std::make_unique<torch::optim::Adam>(
        model->parameters(), torch::optim::AdamOptions(cfg.learning_rate)
                                 .betas({cfg.beta1, cfg.beta2})
                                 .eps(cfg.eps)
                                 .weight_decay(cfg.weight_decay));
  }
  if (cfg.name == "sgd") {
    return std::make_unique<torch::optim::SGD>(
        model->parameters(), torch::optim::SGDOptions(cfg.learning_rate)
                                 .momentum(cfg.momentum)
                                 .weight_decay(cfg.weight_decay));
  }
  throw ConfigError("unknown optimizer '" + cfg.name + "'");
}

LossValues& LossValues::operator+=(const LossValues& o) {
  total += o.total;
  reconstruction += o.reconstruction;
  perceptual += o.perceptual;
  latent_kl += o.latent_kl;
  return *this;
}

LossValues LossValues::operator/(double d) const {
  return {total / d, reconstruction / d, perceptual / d, latent_kl / d};
}

LossValues to_values(const LossBreakdown& b) {
  return {b.total.item<double>(), b.reconstruction.item<double>(), b.perceptual.item<double>(),
          b.latent_kl.item<double>()};
}

std::vector<CycleStep> cycle_forward(Predictor& model, const torch::Tensor& window,
                                     int64_t self_fed_steps, const LossWeights& weights,
                                     const FeatureExtractor* features,
                                     const StepCallback& on_step) {
  const auto n = model->config().input_frames;
  if (self_fed_steps < 0) {
    throw std::invalid_argument("self_fed_steps must be >= 0");
  }
  if (window.dim() != 5) {
    throw std::invalid_argument("cycle_forward: window must be B x L x C x H x W");
  }
  if (window.size(1) < n + self_fed_steps + 1) {
    throw std::invalid_argument("window of " + std::to_string(window.size(1)) +
                                " frames is too short for " + std::to_string(n) + " inputs and " +
                                std::to_string(self_fed_steps + 1) + " targets");
  }
  const bool use_perceptual = features != nullptr && weights.perceptual_weight > 0.0;

  std::vector<CycleStep> steps;
  auto inputs = window.narrow(1, 0, n);
  std::vector<bool> self_fed(static_cast<size_t>(n), false);
  for (int64_t j = 0; j <= self_fed_steps; ++j) {
    CycleStep step;
    step.inputs = inputs;
    step.self_fed = self_fed;
    step.prediction = model->predict_next(inputs);
    const auto target = window.select(1, n + j);

    const auto recon = kl_uncertainty_loss(step.prediction.image, target, weights.alpha);
    torch::Tensor perceptual;
    if (use_perceptual) {
      FeatureStack target_features;
      {
        torch::NoGradGuard no_grad;
        target_features = features->extract(target);
      }
      perceptual =
          deep_perceptual_loss(features->extract(step.prediction.image.mean), target_features);
    } else {
      perceptual = scalar_zero(recon);
    }
    const auto kl = latent_kl(step.prediction.latent.mean, step.prediction.latent.log_variance);
    step.loss = combine_losses(recon, perceptual, kl, weights);

    // the fed-back frame is an ordinary input: no gradient path to step j
    const auto fed_back = step.prediction.image.mean.detach().unsqueeze(1);
    if (on_step) {
      on_step(j, step);
    }
    inputs = torch::cat({inputs.narrow(1, 1, n - 1), fed_back}, 1);
    self_fed.erase(self_fed.begin());
    self_fed.push_back(true);
    steps.push_back(std::move(step));
  }
  return steps;
}

StepReport training_step(Predictor& model, torch::optim::Optimizer& optimizer,
                         const torch::Tensor& window, int64_t self_fed_steps,
                         const LossWeights& weights, const FeatureExtractor* features) {
  optimizer.zero_grad();
  const double count = static_cast<double>(self_fed_steps + 1);
  StepReport report;
  cycle_forward(model, window, self_fed_steps, weights, features,
                [&](int64_t, CycleStep& step) {
                  (step.loss.total / count).backward();
                  const auto values = to_values(step.loss);
                  report.per_step.push_back(values);
                  report.mean += values;
                  report.self_fed.push_back(step.self_fed);
                  // release the graph and activations of this step
                  step.loss = {};
                  step.prediction = {};
                });
  report.mean = report.mean / count;
  optimizer.step();
  return report;
}

std::string epoch_log_to_json(const EpochLog& row) {
  ordered_json j;
  j["epoch"] = row.epoch;
  j["self_fed_steps"] = row.self_fed_steps;
  j["total"] = row.losses.total;
  j["reconstruction"] = row.losses.reconstruction;
  j["perceptual"] = row.losses.perceptual;
  j["latent_kl"] = row.losses.latent_kl;
  j["windows"] = row.windows;
  j["wall_time_s"] = row.wall_time_s ? ordered_json(*row.wall_time_s) : ordered_json(nullptr);
  return j.dump();
}

EpochLog epoch_log_from_json(const std::string& line) {
  try {
    const auto j = ordered_json::parse(line);
    EpochLog row;
    row.epoch = j.at("epoch").get<int64_t>();
    row.self_fed_steps = j.at("self_fed_steps").get<int64_t>();
    row.losses.total = j.at("total").get<double>();
    row.losses.reconstruction = j.at("reconstruction").get<double>();
    row.losses.perceptual = j.at("perceptual").get<double>();
    row.losses.latent_kl = j.at("latent_kl").get<double>();
    row.windows = j.at("windows").get<int64_t>();
    if (!j.at("wall_time_s").is_null()) {
      row.wall_time_s = j["wall_time_s"].get<double>();
    }
    return row;
  } catch (const ordered_json::exception& e) {
    throw ConfigError(std::string("malformed metric log line: ") + e.what());
  }
}

std::vector<EpochLog> read_metric_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read metric log '" + path + "'");
  }
  std::vector<EpochLog> rows;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    try {
      rows.push_back(epoch_log_from_json(line));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::string checkpoint_name(int64_t epoch) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "epoch_%04lld.ckpt", static_cast<long long>(epoch));
  return buf;
}

FitResult fit(Predictor& model, const SequenceDataset& dataset, const TrainConfig& config,
              const FeatureExtractor* features, const FitOptions& options) {
  config.validate();
  const auto n = model->config().input_frames;
  const auto schedule = config.schedule.resolved(n);
  const int64_t max_steps = schedule.enabled ? schedule.max_self_fed_steps : 0;
  const int64_t needed = n + max_steps + 1;
  if (dataset.window_length() < needed) {
    throw ConfigError("dataset windows hold " + std::to_string(dataset.window_length()) +
                      " frames but the schedule needs " + std::to_string(needed) + " (n=" +
                      std::to_string(n) + " inputs + " + std::to_string(max_steps + 1) +
                      " targets)");
  }
  if (dataset.num_sequences() == 0) {
    throw ConfigError("dataset is empty");
  }
  if (config.deterministic) {
    torch::set_num_threads(1);
  }

  auto optimizer = make_optimizer(model, config.optimizer);
  int64_t start_epoch = 0;
  if (!options.resume_from.empty()) {
    const auto meta = load_checkpoint_into(options.resume_from, model, optimizer.get());
    start_epoch = meta.progress.epoch + 1;
  }

  FitResult result;
  std::ofstream log;
  fs::path ckpt_dir;
  if (!options.output_dir.empty()) {
    const fs::path out(options.output_dir);
    ckpt_dir = out / "checkpoints";
    fs::create_directories(ckpt_dir);
    const auto log_path = (out / "metrics.jsonl").string();
    std::vector<EpochLog> kept;
    if (start_epoch > 0 && fs::exists(log_path)) {
      for (const auto& row : read_metric_log(log_path)) {
        if (row.epoch < start_epoch) kept.push_back(row);
      }
    }
    log.open(log_path, std::ios::trunc);
    if (!log) {
      throw IoError("cannot write metric log '" + log_path + "'");
    }
    for (const auto& row : kept) {
      log << epoch_log_to_json(row) << "\n";
    }
    log.flush();
  }

  const auto dtype = model->parameters().front().scalar_type();
  const auto wl = dataset.window_length();
  for (int64_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto s = cycle_steps_for_epoch(schedule, epoch, config.epochs);
    model->train();
    model->set_generator(at::detail::createCPUGenerator(
        mix_seed(config.seed, 2 * static_cast<uint64_t>(epoch) + 1)));

    std::mt19937_64 rng(mix_seed(config.seed, 2 * static_cast<uint64_t>(epoch)));
    std::vector<PlannedWindow> plan;
    for (size_t i = 0; i < dataset.num_sequences(); ++i) {
      for (int64_t k = 0; k < config.windows_per_sequence; ++k) {
        const auto last_start = dataset.sequence_length(i) - wl;
        const auto start = std::uniform_int_distribution<int64_t>(0, last_start)(rng);
        plan.push_back({i, start, mix_seed(static_cast<uint64_t>(epoch), k)});
      }
    }
    std::shuffle(plan.begin(), plan.end(), rng);

    LossValues sum;
    int64_t windows = 0;
    for (size_t b = 0; b < plan.size(); b += static_cast<size_t>(config.batch_size)) {
      const auto end = std::min(plan.size(), b + static_cast<size_t>(config.batch_size));
      std::vector<torch::Tensor> batch;
      for (size_t i = b; i < end; ++i) {
        const auto w = sample_window(dataset, plan[i].sequence, plan[i].start, plan[i].salt);
        batch.push_back(w.sequence.frames.narrow(0, 0, n + s + 1));
      }
      const auto window = torch::stack(batch).to(dtype);
      const auto report = training_step(model, *optimizer, window, s, config.loss, features);
      const auto count = static_cast<double>(end - b);
      sum += LossValues{report.mean.total * count, report.mean.reconstruction * count,
                        report.mean.perceptual * count, report.mean.latent_kl * count};
      windows += static_cast<int64_t>(end - b);
    }

    EpochLog row;
    row.epoch = epoch;
    row.self_fed_steps = s;
    row.losses = sum / static_cast<double>(windows);
    row.windows = windows;
    if (!config.deterministic) {
      row.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    result.log.push_back(row);
    if (log.is_open()) {
      log << epoch_log_to_json(row) << "\n";
      log.flush();
    }
    if (options.on_epoch) {
      options.on_epoch(row);
    }

    const bool last = epoch == config.epochs - 1;
    const bool cadence = config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0;
    if (!ckpt_dir.empty() && (last || cadence)) {
      Checkpoint meta;
      meta.config = model->config();
      meta.progress = {epoch, config.epochs, config.seed};
      meta.run_config = options.run_config_text;
      const auto path = (ckpt_dir / checkpoint_name(epoch)).string();
      save_checkpoint(path, model, meta, optimizer.get());
      result.checkpoints.push_back(path);
    }
  }
  model->set_generator(std::nullopt);
  model->eval();
  return result;
}

}  // namespace vidpred
