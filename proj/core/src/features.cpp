#include "vidpred/features.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include <ATen/core/ivalue.h>

#include "vidpred/errors.hpp"

namespace vidpred {
namespace {

namespace F = torch::nn::functional;

constexpr int kPool = -1;

std::vector<ConvLayerDef> vgg_layers(const std::vector<int>& cfg) {
  std::vector<ConvLayerDef> out;
  int64_t in = 3;
  int block = 1;
  int index = 1;
  for (const int c : cfg) {
    if (c == kPool) {
      out.back().pool_after = true;
      ++block;
      index = 1;
      continue;
    }
    out.push_back({"conv" + std::to_string(block) + "_" + std::to_string(index), in, c, 3, 1,
                   true, false});
    in = c;
    ++index;
  }
  return out;
}

torch::Tensor to_tensor(const std::vector<double>& v) {
  return torch::tensor(v, torch::kDouble);
}

std::vector<double> to_vector(const torch::Tensor& t) {
  auto c = t.to(torch::kDouble).contiguous();
  return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

}  // namespace

std::vector<ConvLayerDef> backbone_layers(const std::string& backbone_id) {
  if (backbone_id == "tiny-conv") {
    return {
        {"conv1", 3, 8, 1, 1, false, false},
        {"conv2", 8, 16, 3, 2, false, false},
        {"conv3", 16, 32, 3, 2, false, false},
        {"conv4", 32, 32, 3, 2, false, false},
    };
  }
  if (backbone_id == "vgg11-style") {
    return vgg_layers({64, kPool, 128, kPool, 256, 256, kPool, 512, 512, kPool, 512, 512, kPool});
  }
  if (backbone_id == "vgg19-style") {
    return vgg_layers({64, 64, kPool, 128, 128, kPool, 256, 256, 256, 256, kPool, 512, 512, 512,
                       512, kPool, 512, 512, 512, 512, kPool});
  }
  throw ConfigError("unknown backbone_id '" + backbone_id + "'");
}

std::vector<std::string> conv_layer_ids(const std::string& backbone_id) {
  std::vector<std::string> ids;
  for (const auto& l : backbone_layers(backbone_id)) {
    ids.push_back(l.id);
  }
  return ids;
}

void save_feature_weights(const std::string& path, const FeatureWeights& weights) {
  torch::serialize::OutputArchive archive;
  archive.write("meta.backbone_id", c10::IValue(weights.backbone_id));
  if (weights.norm_mean && weights.norm_std) {
    archive.write("meta.norm_mean", to_tensor(*weights.norm_mean));
    archive.write("meta.norm_std", to_tensor(*weights.norm_std));
  }
  for (const auto& [id, w] : weights.weights) {
    archive.write("layers." + id + ".weight", w);
  }
  for (const auto& [id, b] : weights.biases) {
    archive.write("layers." + id + ".bias", b);
  }
  try {
    archive.save_to(path);
  } catch (const c10::Error& e) {
    throw IoError("cannot write feature weights '" + path + "': " + e.what_without_backtrace());
  }
}

FeatureWeights load_feature_weights(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw IoError("feature weights file not found: " + path);
  }
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path);
  } catch (const c10::Error& e) {
    throw IoError("cannot read feature weights '" + path + "': " + e.what_without_backtrace());
  }
  FeatureWeights out;
  c10::IValue backbone;
  if (!archive.try_read("meta.backbone_id", backbone) || !backbone.isString()) {
    throw ConfigError("feature weights '" + path + "' lack a backbone_id record");
  }
  out.backbone_id = backbone.toStringRef();
  torch::Tensor mean;
  torch::Tensor std;
  if (archive.try_read("meta.norm_mean", mean) && archive.try_read("meta.norm_std", std)) {
    out.norm_mean = to_vector(mean);
    out.norm_std = to_vector(std);
  }
  for (const auto& layer : backbone_layers(out.backbone_id)) {
    torch::Tensor w;
    if (!archive.try_read("layers." + layer.id + ".weight", w)) {
      throw ConfigError("feature weights '" + path + "' missing layer '" + layer.id + "'");
    }
    out.weights[layer.id] = w;
    torch::Tensor b;
    if (archive.try_read("layers." + layer.id + ".bias", b)) {
      out.biases[layer.id] = b;
    }
  }
  return out;
}

FeatureExtractor::FeatureExtractor(TapSpec spec) : spec_(std::move(spec)) {
  layers_ = backbone_layers(spec_.backbone_id);
  if (spec_.weights_source == WeightsSource::File) {
    init_from(load_feature_weights(spec_.weights_path));
  } else {
    init_random();
  }
  finalize();
}

FeatureExtractor::FeatureExtractor(TapSpec spec, const FeatureWeights& weights)
    : spec_(std::move(spec)) {
  layers_ = backbone_layers(spec_.backbone_id);
  init_from(weights);
  finalize();
}

void FeatureExtractor::init_random() {
  auto gen = at::detail::createCPUGenerator(spec_.seed);
  for (const auto& l : layers_) {
    const double fan_in = static_cast<double>(l.in_channels * l.kernel * l.kernel);
    Params p;
    p.weight = torch::randn({l.out_channels, l.in_channels, l.kernel, l.kernel}, gen,
                            torch::kFloat32) *
               std::sqrt(2.0 / fan_in);
    if (l.bias) {
      p.bias = torch::zeros({l.out_channels}, torch::kFloat32);
    }
    params_f32_.push_back(p);
  }
}

void FeatureExtractor::init_from(const FeatureWeights& weights) {
  if (weights.backbone_id != spec_.backbone_id) {
    throw ConfigError("feature weights are for backbone '" + weights.backbone_id +
                      "', expected '" + spec_.backbone_id + "'");
  }
  for (const auto& l : layers_) {
    auto it = weights.weights.find(l.id);
    if (it == weights.weights.end()) {
      throw ConfigError("feature weights missing layer '" + l.id + "'");
    }
    const std::vector<int64_t> expected{l.out_channels, l.in_channels, l.kernel, l.kernel};
    if (it->second.sizes() != c10::IntArrayRef(expected)) {
      std::ostringstream msg;
      msg << "feature weights layer '" << l.id << "' has shape " << it->second.sizes()
          << ", expected " << c10::IntArrayRef(expected);
      throw ConfigError(msg.str());
    }
    Params p;
    p.weight = it->second.to(torch::kFloat32).clone();
    auto bit = weights.biases.find(l.id);
    if (bit != weights.biases.end()) {
      if (bit->second.dim() != 1 || bit->second.size(0) != l.out_channels) {
        throw ConfigError("feature weights bias '" + l.id + "' has the wrong shape");
      }
      p.bias = bit->second.to(torch::kFloat32).clone();
    } else if (l.bias) {
      p.bias = torch::zeros({l.out_channels}, torch::kFloat32);
    }
    params_f32_.push_back(p);
  }
  norm_mean_ = weights.norm_mean;
  norm_std_ = weights.norm_std;
}

void FeatureExtractor::finalize() {
  if (spec_.tap_layers.empty()) {
    throw ConfigError("tap_layers must not be empty");
  }
  size_t prev = 0;
  bool first = true;
  for (const auto& tap : spec_.tap_layers) {
    auto it = std::find_if(layers_.begin(), layers_.end(),
                           [&](const ConvLayerDef& l) { return l.id == tap; });
    if (it == layers_.end()) {
      throw ConfigError("unknown tap layer '" + tap + "' for backbone '" + spec_.backbone_id +
                        "'");
    }
    const auto idx = static_cast<size_t>(it - layers_.begin());
    if (!first && idx <= prev) {
      throw ConfigError("tap_layers must be unique and ordered shallow to deep");
    }
    prev = idx;
    first = false;
  }
  last_tap_ = prev;
  if (spec_.normalize_input) {
    if (!norm_mean_ || !norm_std_ || norm_mean_->size() != 3 || norm_std_->size() != 3) {
      throw ConfigError("normalize_input requires weights that declare 3-channel mean/std");
    }
  }
  for (auto& p : params_f32_) {
    p.weight.set_requires_grad(false);
    Params d{p.weight.to(torch::kDouble), p.bias.defined() ? p.bias.to(torch::kDouble)
                                                             : torch::Tensor()};
    params_f64_.push_back(d);
  }
}

FeatureStack FeatureExtractor::extract(const torch::Tensor& images) const {
  if (images.dim() != 3 && images.dim() != 4) {
    throw std::invalid_argument("extract: expected C x H x W or B x C x H x W images");
  }
  const bool batched = images.dim() == 4;
  auto x = batched ? images : images.unsqueeze(0);
  if (x.size(1) == 1) {
    x = x.expand({x.size(0), 3, x.size(2), x.size(3)});
  } else if (x.size(1) != 3) {
    throw std::invalid_argument("extract: images must have 1 or 3 channels");
  }
  if (spec_.input_size > 0 &&
      (x.size(2) != spec_.input_size || x.size(3) != spec_.input_size)) {
    x = F::interpolate(x, F::InterpolateFuncOptions()
                              .size(std::vector<int64_t>{spec_.input_size, spec_.input_size})
                              .mode(torch::kBilinear)
                              .align_corners(false));
  }
  if (spec_.normalize_input) {
    auto opts = torch::TensorOptions().dtype(x.dtype());
    auto mean = torch::tensor(*norm_mean_, opts).view({1, 3, 1, 1});
    auto std = torch::tensor(*norm_std_, opts).view({1, 3, 1, 1});
    x = (x - mean) / std;
  }
  const auto& params = x.scalar_type() == torch::kDouble ? params_f64_ : params_f32_;
  if (x.scalar_type() != torch::kDouble && x.scalar_type() != torch::kFloat32) {
    x = x.to(torch::kFloat32);
  }

  FeatureStack out;
  size_t next_tap = 0;
  for (size_t i = 0; i <= last_tap_; ++i) {
    const auto& l = layers_[i];
    x = torch::conv2d(x, params[i].weight, params[i].bias, l.stride, l.kernel / 2);
    x = torch::relu(x);
    if (next_tap < spec_.tap_layers.size() && spec_.tap_layers[next_tap] == l.id) {
      out.layers.push_back({l.id, batched ? x : x.squeeze(0)});
      ++next_tap;
    }
    if (l.pool_after) {
      x = torch::max_pool2d(x, 2);
    }
  }
  return out;
}

std::vector<FeatureStack> extract_features(const torch::Tensor& images, const TapSpec& spec) {
  const FeatureExtractor extractor(spec);
  const auto batch = images.dim() == 4 ? images : images.unsqueeze(0);
  std::vector<FeatureStack> out;
  for (int64_t b = 0; b < batch.size(0); ++b) {
    out.push_back(extractor.extract(batch[b]));
  }
  return out;
}

VideoEmbedder::VideoEmbedder(VideoEmbedderSpec spec)
    : spec_(std::move(spec)), extractor_(spec_.frame_backbone) {
  check_dim();
}

VideoEmbedder::VideoEmbedder(VideoEmbedderSpec spec, const FeatureWeights& weights)
    : spec_(std::move(spec)), extractor_(spec_.frame_backbone, weights) {
  check_dim();
}

void VideoEmbedder::check_dim() {
  output_dim_ = 0;
  for (const auto& tap : spec_.frame_backbone.tap_layers) {
    for (const auto& l : extractor_.layers()) {
      if (l.id == tap) {
        output_dim_ += l.out_channels;
      }
    }
  }
  if (spec_.output_dim != 0 && spec_.output_dim != output_dim_) {
    throw ConfigError("embedder output_dim " + std::to_string(spec_.output_dim) +
                      " does not match the tap layers (" + std::to_string(output_dim_) + ")");
  }
}

std::string VideoEmbedder::id() const {
  std::string id = spec_.frame_backbone.backbone_id;
  id += spec_.frame_backbone.weights_source == WeightsSource::File
            ? "[file]"
            : "[seed=" + std::to_string(spec_.frame_backbone.seed) + "]";
  id += spec_.temporal_pooling == TemporalPooling::Mean ? "/mean/" : "/max/";
  for (size_t i = 0; i < spec_.frame_backbone.tap_layers.size(); ++i) {
    id += (i ? "+" : "") + spec_.frame_backbone.tap_layers[i];
  }
  return id;
}

torch::Tensor VideoEmbedder::embed_frames(const torch::Tensor& frames) const {
  if (frames.dim() != 4 || frames.size(0) < 1) {
    throw std::invalid_argument("embed: sequence must be a nonempty T x C x H x W tensor");
  }
  torch::NoGradGuard no_grad;
  const auto stack = extractor_.extract(frames.to(torch::kDouble));
  std::vector<torch::Tensor> pooled;
  for (const auto& layer : stack.layers) {
    pooled.push_back(layer.features.mean({2, 3}));
  }
  return torch::cat(pooled, 1);
}

torch::Tensor VideoEmbedder::embed(const FrameSequence& seq) const {
  if (!seq.frames.defined() || seq.frames.dim() != 4 || seq.length() < 1) {
    throw std::invalid_argument("embed_video: empty sequence");
  }
  const auto per_frame = embed_frames(seq.frames);
  if (spec_.temporal_pooling == TemporalPooling::Mean) {
    return per_frame.mean(0);
  }
  return std::get<0>(per_frame.max(0));
}

}  // namespace vidpred
