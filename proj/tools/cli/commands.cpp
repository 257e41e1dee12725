#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>
#include <torch/torch.h>
#include <torch/version.h>

#include "lock.hpp"
#include "plot.hpp"
#include "run_config.hpp"
#include "vidpred/checkpoint.hpp"
#include "vidpred/errors.hpp"
#include "vidpred/image_io.hpp"
#include "vidpred/metrics.hpp"

#ifndef VIDPRED_VERSION
#define VIDPRED_VERSION "unknown"
#endif

namespace vidpred::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

void write_png(const fs::path& path, const cv::Mat& img) {
  if (!cv::imwrite(path.string(), img)) {
    throw IoError("cannot write " + path.string());
  }
}

std::string versions_json() {
  ordered_json j;
  j["vidpred"] = VIDPRED_VERSION;
  j["libtorch"] = TORCH_VERSION;
  j["opencv"] = CV_VERSION;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
               "." + std::to_string(EIGEN_MINOR_VERSION);
  j["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  j["compiler"] = __VERSION__;
  return j.dump(2) + "\n";
}

torch::Tensor match_channels(torch::Tensor x, int64_t channels) {
  const auto c = x.size(-3);
  if (c == channels) return x;
  if (channels == 1 && c == 3) return x.mean(-3, true);
  if (channels == 3 && c == 1) return x.expand({x.size(0), 3, x.size(2), x.size(3)}).clone();
  throw ConfigError("cannot convert " + std::to_string(c) + "-channel frames to " +
                    std::to_string(channels) + " channels");
}

/// First `count` frames of sequence i, rescaled and centre-cropped to the model size.
torch::Tensor model_frames(const SequenceDataset& ds, size_t i, int64_t count,
                           const PredictorConfig& pc) {
  TransformSpec tf;
  tf.height = pc.height;
  tf.width = pc.width;
  tf.rescale = RescaleMode::ShorterSide;
  tf.random_crop = false;
  auto one = SequenceDataset::from_sequences({FrameSequence{ds.frames(i, 0, count)}}, count, tf);
  return match_channels(sample_window(one, 0, 0).sequence.frames, pc.channels);
}

SequenceDataset training_dataset(const RunConfig& cfg) {
  const auto wl = cfg.resolved_window_length();
  if (cfg.dataset.type == "directory") {
    DirectoryLayout layout;
    layout.window_length = wl;
    layout.transform = cfg.dataset.transform;
    return load_directory_dataset(cfg.dataset.path, layout);
  }
  return make_synthetic_dataset(cfg.dataset.synthetic, wl, cfg.dataset.transform);
}

SyntheticSpec heldout_spec(const RunConfig& cfg, int64_t min_length) {
  auto spec = cfg.dataset.synthetic;
  spec.seed = cfg.dataset.heldout_seed;
  spec.num_sequences = cfg.dataset.heldout_sequences;
  spec.length = std::max(spec.length, min_length);
  return spec;
}

cv::Mat to_bgr8(const torch::Tensor& image) {
  auto x = image.detach().to(torch::kFloat32).clamp(0.0, 1.0);
  if (x.size(0) == 1) x = x.expand({3, x.size(1), x.size(2)});
  auto hwc = (x.permute({1, 2, 0}) * 255.0).round().to(torch::kUInt8).contiguous();
  cv::Mat rgb(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3,
              hwc.data_ptr<uint8_t>());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

std::string frame_name(int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06lld.png", static_cast<long long>(i));
  return buf;
}

RunConfig evaluation_config(const EvaluateOptions& opts, const Checkpoint& meta) {
  RunConfig cfg;
  if (opts.config_path) {
    cfg = load_run_config(*opts.config_path);
  } else if (!meta.run_config.empty()) {
    cfg = parse_run_config(meta.run_config, opts.checkpoint + ":run_config");
  }
  if (cfg.predictor != meta.config) {
    if (opts.config_path) {
      throw ConfigError("predictor section of " + *opts.config_path +
                        " does not match the checkpoint");
    }
    cfg.predictor = meta.config;
  }
  return cfg;
}

}  // namespace

int guarded(const char* command, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << command << ": configuration error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << command << ": i/o error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << command << ": numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << command << ": error: " << e.what() << "\n";
    return 1;
  }
}

int run_train(const TrainOptions& opts) {
  auto cfg = load_run_config(opts.config_path);
  if (opts.output_dir) cfg.output_dir = *opts.output_dir;
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.deterministic) cfg.deterministic = true;
  cfg.train.seed = cfg.seed;
  cfg.train.deterministic = cfg.deterministic;
  cfg.validate();
  if (opts.resume && !fs::is_regular_file(*opts.resume)) {
    throw IoError("resume checkpoint not found: " + *opts.resume);
  }

  const fs::path out = cfg.output_dir;
  OutputLock lock(out);
  const auto text = serialize_run_config(cfg);
  write_text(out / "config.yaml", text);
  write_text(out / "versions.json", versions_json());

  auto dataset = training_dataset(cfg);
  for (const auto& w : dataset.warnings()) {
    std::cerr << "warning: " << w << "\n";
  }
  std::optional<FeatureExtractor> features;
  if (cfg.train.loss.perceptual_weight > 0.0) {
    features.emplace(cfg.features);
  }

  if (cfg.deterministic) torch::set_num_threads(1);
  torch::manual_seed(cfg.seed);
  Predictor model(cfg.predictor);

  FitOptions fo;
  fo.output_dir = out.string();
  fo.resume_from = opts.resume.value_or("");
  fo.run_config_text = text;
  const auto total = cfg.train.epochs;
  fo.on_epoch = [total](const EpochLog& row) {
    std::printf("epoch %lld/%lld  self-fed %lld  loss %.6g  (recon %.6g, perceptual %.6g, kl %.6g)\n",
                static_cast<long long>(row.epoch + 1), static_cast<long long>(total),
                static_cast<long long>(row.self_fed_steps), row.losses.total,
                row.losses.reconstruction, row.losses.perceptual, row.losses.latent_kl);
    std::fflush(stdout);
  };
  const auto result = fit(model, dataset, cfg.train, features ? &*features : nullptr, fo);
  if (!result.checkpoints.empty()) {
    std::printf("final checkpoint: %s\n", result.checkpoints.back().c_str());
  }
  return 0;
}

int run_rollout(const RolloutOptions& opts) {
  if (opts.steps < 1) {
    throw ConfigError("--steps must be at least 1");
  }
  Checkpoint meta;
  auto model = load_checkpoint(opts.checkpoint, &meta);
  model->eval();
  const auto& pc = meta.config;

  const auto seq = load_sequence_directory(opts.input_dir);
  const auto available = seq.frames.size(0);
  if (available < pc.input_frames) {
    throw ConfigError("input has " + std::to_string(available) + " frames but the model needs " +
                      std::to_string(pc.input_frames));
  }
  auto one = SequenceDataset::from_sequences({seq}, available, TransformSpec{});
  const auto frames = model_frames(one, 0, available, pc);

  if (!pc.deterministic_latent) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(opts.seed);
    model->set_generator(gen);
  }
  const auto result = model->rollout_gaussian(frames, opts.steps);

  const fs::path out = opts.output_dir;
  OutputLock lock(out);
  fs::create_directories(out / "frames");
  for (int64_t i = 0; i < opts.steps; ++i) {
    write_image((out / "frames" / frame_name(i)).string(), result.means[i], 16);
  }

  const int scale = std::max<int>(1, static_cast<int>(256 / std::max(pc.height, pc.width)));
  const cv::Size size(static_cast<int>(pc.width) * scale, static_cast<int>(pc.height) * scale);
  cv::VideoWriter video((out / "preview.avi").string(), cv::VideoWriter::fourcc('M', 'J', 'P', 'G'),
                        4.0, size);
  if (!video.isOpened()) {
    throw IoError("cannot open video writer for " + (out / "preview.avi").string());
  }
  const auto seed_frames = frames.narrow(0, available - pc.input_frames, pc.input_frames);
  for (int64_t i = 0; i < pc.input_frames + opts.steps; ++i) {
    const auto f = i < pc.input_frames ? seed_frames[i] : result.means[i - pc.input_frames];
    cv::Mat big;
    cv::resize(to_bgr8(f), big, size, 0, 0, cv::INTER_NEAREST);
    if (i < pc.input_frames) {
      cv::rectangle(big, cv::Rect(0, 0, size.width, size.height), cv::Scalar(0, 200, 0), 2);
    }
    video.write(big);
  }
  video.release();

  ordered_json summary;
  summary["checkpoint"] = opts.checkpoint;
  summary["input"] = opts.input_dir;
  summary["steps"] = opts.steps;
  summary["seed_frames"] = pc.input_frames;
  const auto var = result.log_variances.exp().mean(1);  // k x H x W
  std::vector<double> mean_var;
  for (int64_t i = 0; i < opts.steps; ++i) mean_var.push_back(var[i].mean().item<double>());
  summary["mean_variance"] = mean_var;

  if (opts.heatmaps) {
    fs::create_directories(out / "variance");
    const double vmax = std::max(var.max().item<double>(), 1e-12);
    for (int64_t i = 0; i < opts.steps; ++i) {
      auto v = (var[i] / vmax * 255.0).clamp(0, 255).round().to(torch::kUInt8).contiguous();
      cv::Mat grey(static_cast<int>(v.size(0)), static_cast<int>(v.size(1)), CV_8UC1,
                   v.data_ptr<uint8_t>());
      cv::Mat color, big;
      cv::applyColorMap(grey, color, cv::COLORMAP_INFERNO);
      cv::resize(color, big, size, 0, 0, cv::INTER_NEAREST);
      write_png(out / "variance" / frame_name(i), big);
    }
    summary["heatmap_scale_max_variance"] = vmax;
  }
  write_text(out / "rollout.json", summary.dump(2) + "\n");
  std::printf("wrote %lld frames to %s\n", static_cast<long long>(opts.steps),
              (out / "frames").string().c_str());
  return 0;
}

int run_evaluate(const EvaluateOptions& opts) {
  Checkpoint meta;
  auto model = load_checkpoint(opts.checkpoint, &meta);
  model->eval();
  auto cfg = evaluation_config(opts, meta);
  const auto& pc = meta.config;
  const auto n = pc.input_frames;
  auto horizons = opts.horizons.empty() ? cfg.metrics.horizons : opts.horizons;
  if (horizons.empty()) {
    throw ConfigError("no evaluation horizons");
  }
  for (const auto h : horizons) {
    if (h < 1) throw ConfigError("horizons must be positive");
  }
  std::sort(horizons.begin(), horizons.end());
  horizons.erase(std::unique(horizons.begin(), horizons.end()), horizons.end());
  const auto max_h = horizons.back();

  SequenceDataset ds;
  std::string source;
  if (opts.dataset_dir) {
    DirectoryLayout layout;
    layout.window_length = n + 1;
    ds = load_directory_dataset(*opts.dataset_dir, layout);
    source = *opts.dataset_dir;
  } else if (cfg.dataset.type == "synthetic") {
    auto spec = heldout_spec(cfg, n + max_h);
    ds = make_synthetic_dataset(spec, n + 1, TransformSpec{pc.height, pc.width});
    source = "synthetic held-out (seed " + std::to_string(spec.seed) + ")";
  } else {
    throw ConfigError("evaluate needs --dataset when the run used a directory dataset");
  }

  if (!pc.deterministic_latent) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(opts.seed);
    model->set_generator(gen);
  }
  const FeatureExtractor extractor(cfg.features);
  const VideoEmbedder embedder(cfg.metrics.embedder);

  double mse_sum = 0.0, psnr_sum = 0.0, lp_sum = 0.0;
  int64_t windows = 0;
  std::map<int64_t, std::vector<FrameSequence>> real_clips, pred_clips;
  std::map<int64_t, double> rollout_mse_sum;
  torch::NoGradGuard no_grad;
  for (size_t i = 0; i < ds.num_sequences(); ++i) {
    const auto len = ds.sequence_length(i);
    const auto frames = model_frames(ds, i, len, pc);
    for (int64_t s = 0; s + n < len; ++s) {
      const auto pred = model->predict_next(frames.narrow(0, s, n)).image.mean;
      const auto target = frames[s + n];
      const auto m = mse(pred, target);
      mse_sum += m;
      psnr_sum += psnr_from_mse(m);
      lp_sum += perceptual_distance(pred, target, extractor);
      ++windows;
    }
    const auto k = std::min(max_h, len - n);
    if (k < 1) continue;
    const auto rolled = model->rollout(frames.narrow(0, 0, n), k);
    for (const auto h : horizons) {
      if (h > k) continue;
      const auto real = frames.narrow(0, n, h);
      const auto pred = rolled.narrow(0, 0, h);
      real_clips[h].push_back(FrameSequence{real});
      pred_clips[h].push_back(FrameSequence{pred});
      rollout_mse_sum[h] += mse(pred, real);
    }
  }
  if (windows == 0) {
    throw ConfigError("no sequence in " + source + " has more than " + std::to_string(n) +
                      " frames");
  }

  MetricReport report;
  report.entries.push_back({"mse", mse_sum / windows, std::nullopt, std::nullopt, windows});
  report.entries.push_back({"psnr", psnr_sum / windows, std::nullopt, std::nullopt, windows});
  report.entries.push_back(
      {"lpips_style", lp_sum / windows, std::nullopt, std::nullopt, windows});
  for (const auto h : horizons) {
    const auto count = static_cast<int64_t>(real_clips[h].size());
    if (count < 2) {
      throw ConfigError("horizon " + std::to_string(h) + " needs at least two sequences with " +
                        std::to_string(n + h) + " frames; found " + std::to_string(count));
    }
    report.entries.push_back(
        {"rollout_mse", rollout_mse_sum[h] / count, h, std::nullopt, count});
    auto r = fvd(real_clips[h], pred_clips[h], embedder);
    r.entry.horizon = h;
    report.entries.push_back(r.entry);
  }
  report.metadata["checkpoint"] = opts.checkpoint;
  report.metadata["dataset"] = source;
  report.metadata["psnr_cap_db"] = std::to_string(kPsnrCapDb);
  report.metadata["lpips_style"] =
      "uncalibrated feature distance, backbone " + cfg.features.backbone_id;
  report.metadata["embedder_id"] = embedder.id();
  report.validate();

  const fs::path out = opts.output_dir;
  OutputLock lock(out);
  report.save((out / "report.json").string());
  for (const auto& e : report.entries) {
    std::printf("%-12s %s %.6g (n=%lld)\n", e.name.c_str(),
                e.horizon ? ("h=" + std::to_string(*e.horizon)).c_str() : "   ", e.value,
                static_cast<long long>(e.sample_count));
  }
  return 0;
}

int run_plot(const PlotOptions& opts) {
  const fs::path in = opts.input;
  if (!fs::is_regular_file(in)) {
    throw IoError("plot input not found: " + opts.input);
  }
  const fs::path out = opts.output_dir;
  fs::create_directories(out);

  if (in.extension() == ".jsonl") {
    const auto log = read_metric_log(opts.input);
    if (log.empty()) {
      throw ConfigError(opts.input + " contains no epochs");
    }
    std::vector<double> epoch, total, recon, perc, kl, steps;
    for (const auto& row : log) {
      epoch.push_back(static_cast<double>(row.epoch));
      total.push_back(row.losses.total);
      recon.push_back(row.losses.reconstruction);
      perc.push_back(row.losses.perceptual);
      kl.push_back(row.losses.latent_kl);
      steps.push_back(static_cast<double>(row.self_fed_steps));
    }
    write_png(out / "loss_total.png", line_chart("total loss", {{"total", epoch, total}}));
    write_png(out / "loss_terms.png",
              line_chart("loss terms", {{"reconstruction", epoch, recon},
                                        {"perceptual", epoch, perc},
                                        {"latent kl", epoch, kl}}));
    write_png(out / "schedule.png",
              line_chart("self-fed steps per epoch", {{"self-fed steps", epoch, steps}}));
    ordered_json data;
    data["epoch"] = epoch;
    data["total"] = total;
    data["reconstruction"] = recon;
    data["perceptual"] = perc;
    data["latent_kl"] = kl;
    data["self_fed_steps"] = steps;
    write_text(out / "curves.json", data.dump(2) + "\n");
    std::printf("wrote loss_total.png, loss_terms.png, schedule.png to %s\n", out.c_str());
    return 0;
  }

  const auto report = MetricReport::load(opts.input);
  std::vector<std::string> labels;
  std::vector<double> values;
  ordered_json data = ordered_json::array();
  for (const auto& e : report.entries) {
    if (e.name != "fvd") continue;
    labels.push_back("h=" + std::to_string(e.horizon.value_or(0)));
    values.push_back(e.value);
    data.push_back({{"horizon", e.horizon.value_or(0)}, {"fvd", e.value},
                    {"embedder_id", e.embedder_id.value_or("")}});
  }
  if (values.empty()) {
    throw ConfigError(opts.input + " has no fvd entries");
  }
  write_png(out / "fvd.png", bar_chart("FVD by horizon", labels, values));
  write_text(out / "fvd.json", data.dump(2) + "\n");
  std::printf("wrote fvd.png to %s\n", out.c_str());
  return 0;
}

int run_make_dataset(const MakeDatasetOptions& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) cfg = load_run_config(opts.config_path);
  auto spec = opts.heldout ? heldout_spec(cfg, 1) : cfg.dataset.synthetic;
  spec.validate();
  const auto ds = make_synthetic_dataset(spec, 1, TransformSpec{spec.size, spec.size});
  const fs::path out = opts.output_dir;
  OutputLock lock(out);
  for (size_t i = 0; i < ds.num_sequences(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "seq_%04zu", i);
    write_sequence_directory(out, name, ds.sequence(i));
  }
  std::printf("wrote %zu sequences to %s\n", ds.num_sequences(), out.c_str());
  return 0;
}

}  // namespace vidpred::cli
