#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "vidpred/types.hpp"

namespace vidpred {

enum class WeightsSource { RandomFixed, File };

/// Which backbone to run and which conv layers to tap.
struct TapSpec {
  std::string backbone_id = "tiny-conv";
  /// Conv layer ids, shallow to deep. Use conv_layer_ids() for "every conv layer".
  std::vector<std::string> tap_layers = {"conv1", "conv2", "conv3", "conv4"};
  bool normalize_input = false;
  WeightsSource weights_source = WeightsSource::RandomFixed;
  std::string weights_path;
  uint64_t seed = 0;
  /// Square resolution the backbone expects; 0 accepts the input as is.
  int input_size = 0;

  bool operator==(const TapSpec&) const = default;
};

/// One convolution of a backbone. Activation is always ReLU.
struct ConvLayerDef {
  std::string id;
  int64_t in_channels;
  int64_t out_channels;
  int64_t kernel;
  int64_t stride;
  bool bias;
  bool pool_after;  // 2x2 max pool after the activation
};

/// Known backbones: "tiny-conv", "vgg11-style", "vgg19-style".
std::vector<ConvLayerDef> backbone_layers(const std::string& backbone_id);
std::vector<std::string> conv_layer_ids(const std::string& backbone_id);

/// Contents of a feature weights file.
struct FeatureWeights {
  std::string backbone_id;
  std::map<std::string, torch::Tensor> weights;  // layer id -> out x in x k x k
  std::map<std::string, torch::Tensor> biases;   // layer id -> out
  std::optional<std::vector<double>> norm_mean;
  std::optional<std::vector<double>> norm_std;
};

void save_feature_weights(const std::string& path, const FeatureWeights& weights);
FeatureWeights load_feature_weights(const std::string& path);

/// Frozen convolutional feature extractor. Immutable after construction, so a
/// single instance can be shared between threads for read-only use.
///
/// Taps are post-ReLU outputs of each requested conv layer, taken before any
/// pooling. Inputs are C x H x W or B x C x H x W in [0, 1]; single-channel
/// inputs are replicated to three channels. Gradients flow to the input only.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(TapSpec spec);
  /// Uses the given weights instead of consulting spec.weights_source.
  FeatureExtractor(TapSpec spec, const FeatureWeights& weights);

  const TapSpec& spec() const { return spec_; }
  const std::vector<ConvLayerDef>& layers() const { return layers_; }

  /// Feature maps keep the batch dimension of the input.
  FeatureStack extract(const torch::Tensor& images) const;

 private:
  void init_random();
  void init_from(const FeatureWeights& weights);
  void finalize();

  struct Params {
    torch::Tensor weight;
    torch::Tensor bias;
  };

  TapSpec spec_;
  std::vector<ConvLayerDef> layers_;
  std::vector<Params> params_f32_;
  std::vector<Params> params_f64_;
  size_t last_tap_ = 0;
  std::optional<std::vector<double>> norm_mean_;
  std::optional<std::vector<double>> norm_std_;
};

/// One FeatureStack per image of a B x C x H x W batch.
std::vector<FeatureStack> extract_features(const torch::Tensor& images, const TapSpec& spec);

enum class TemporalPooling { Mean, Max };

struct VideoEmbedderSpec {
  TapSpec frame_backbone;
  TemporalPooling temporal_pooling = TemporalPooling::Mean;
  /// Expected embedding size; 0 derives it from the tap layers.
  int output_dim = 0;

  bool operator==(const VideoEmbedderSpec&) const = default;
};

/// Embeds a clip: every tap layer is averaged spatially, the per-layer vectors
/// are concatenated, and the per-frame vectors are pooled over time.
class VideoEmbedder {
 public:
  explicit VideoEmbedder(VideoEmbedderSpec spec);
  VideoEmbedder(VideoEmbedderSpec spec, const FeatureWeights& weights);

  int64_t output_dim() const { return output_dim_; }
  /// Identifier carried alongside every FVD value.
  std::string id() const;

  /// Returns a 1-D double tensor of output_dim().
  torch::Tensor embed(const FrameSequence& seq) const;
  /// Per-frame embeddings, T x output_dim, before temporal pooling.
  torch::Tensor embed_frames(const torch::Tensor& frames) const;

 private:
  void check_dim();

  VideoEmbedderSpec spec_;
  FeatureExtractor extractor_;
  int64_t output_dim_ = 0;
};

}  // namespace vidpred
