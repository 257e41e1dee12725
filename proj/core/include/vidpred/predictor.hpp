#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "vidpred/attention.hpp"
#include "vidpred/types.hpp"

namespace vidpred {

struct PredictorConfig {
  int64_t input_frames = 6;
  int64_t channels = 3;
  int64_t height = 64;
  int64_t width = 64;
  /// Channel width of each downsampling stage; the stage count is widths.size().
  std::vector<int64_t> widths = {32, 64, 128};
  int64_t latent_dim = 128;
  SkipConfig skip;
  /// In eval mode, use the posterior mean as the latent sample.
  bool deterministic_latent = true;

  int64_t stages() const { return static_cast<int64_t>(widths.size()); }
  /// Feature-map heights from full resolution down to the bottleneck.
  std::vector<int64_t> level_heights() const;

  void validate() const;
  bool operator==(const PredictorConfig&) const = default;
};

struct LatentSample {
  torch::Tensor mean;
  torch::Tensor log_variance;
  torch::Tensor sample;
};

/// Encoder feature maps keyed by their height.
struct FeaturePyramid {
  std::map<int64_t, torch::Tensor> levels;
};

struct EncoderOutput {
  FeaturePyramid pyramid;
  LatentSample latent;
};

struct Prediction {
  GaussianImage image;
  LatentSample latent;
};

struct Rollout {
  torch::Tensor means;          // k x C x H x W (B x k x C x H x W for batched seeds)
  torch::Tensor log_variances;  // same shape as means
};

/// Pre-activation residual block, two 3x3 convolutions.
class ResBlockImpl : public torch::nn::Module {
 public:
  explicit ResBlockImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr};
  torch::nn::Conv2d conv2_{nullptr};
};
TORCH_MODULE(ResBlock);

/// ResNet-VAE next-frame predictor.
///
/// The n input frames are concatenated along channels and encoded through
/// `widths.size()` stride-2 stages into a Gaussian latent. The decoder starts
/// from a linear projection of the latent sample at the bottleneck resolution,
/// upsamples stage by stage, and applies the configured skip block wherever a
/// level height appears in `skip.resolutions`. The head emits a sigmoid mean
/// and a log-variance smoothly bounded to [-7, 7].
///
/// The latent is sampled by reparameterisation in training mode, or in eval
/// mode when `deterministic_latent` is false; otherwise sample == mean.
class PredictorImpl : public torch::nn::Module {
 public:
  explicit PredictorImpl(PredictorConfig cfg);

  const PredictorConfig& config() const { return cfg_; }

  /// frames: n x C x H x W or B x n x C x H x W. Pyramid maps always carry a batch dim.
  EncoderOutput encode(const torch::Tensor& frames);
  /// Output is batched as the pyramid is; see predict_next for unbatched use.
  GaussianImage decode(const LatentSample& latent, const FeaturePyramid& pyramid);
  Prediction predict_next(const torch::Tensor& frames);

  /// Iterated prediction: each predicted mean becomes the newest input frame.
  /// Returns the k predicted means. Runs without gradient tracking.
  torch::Tensor rollout(const torch::Tensor& seed, int64_t k);
  Rollout rollout_gaussian(const torch::Tensor& seed, int64_t k);

  /// Generator used for latent noise; unset uses the global torch generator.
  void set_generator(std::optional<at::Generator> gen) { generator_ = std::move(gen); }

  std::map<int64_t, AttentionSkip>& attention_skips() { return attention_skips_; }
  std::map<int64_t, ResidualSkip>& residual_skips() { return residual_skips_; }

 private:
  bool sampling() const { return is_training() || !cfg_.deterministic_latent; }
  torch::Tensor apply_skip(int64_t height, const torch::Tensor& x, const FeaturePyramid& pyramid);

  PredictorConfig cfg_;
  std::vector<int64_t> heights_;
  std::vector<int64_t> level_widths_;
  int64_t bottom_h_ = 0;
  int64_t bottom_w_ = 0;

  torch::nn::Conv2d stem_{nullptr};
  torch::nn::ModuleList enc_blocks_;
  torch::nn::ModuleList downs_;
  torch::nn::Linear to_latent_{nullptr};
  torch::nn::Linear from_latent_{nullptr};
  torch::nn::ModuleList dec_blocks_;
  torch::nn::ModuleList ups_;
  torch::nn::Conv2d head_{nullptr};
  std::map<int64_t, AttentionSkip> attention_skips_;
  std::map<int64_t, ResidualSkip> residual_skips_;
  std::optional<at::Generator> generator_;
};
TORCH_MODULE(Predictor);

/// Copies parameters with matching names and shapes from `src` into `dst`.
void copy_matching_parameters(torch::nn::Module& dst, const torch::nn::Module& src);

}  // namespace vidpred
