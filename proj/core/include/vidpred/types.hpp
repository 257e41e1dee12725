#pragma once

#include <string>
#include <vector>

#include <torch/torch.h>

namespace vidpred {

/// Bounds of the predicted log-variance.
inline constexpr double kMinLogVariance = -7.0;
inline constexpr double kMaxLogVariance = 7.0;

/// Ordered stack of frames, shape T x C x H x W, intensities in [0, 1].
struct FrameSequence {
  torch::Tensor frames;
  double frame_interval = 0.1;  // seconds, metadata only

  int64_t length() const { return frames.defined() ? frames.size(0) : 0; }
  int64_t channels() const { return frames.size(1); }
  int64_t height() const { return frames.size(2); }
  int64_t width() const { return frames.size(3); }

  /// Throws std::invalid_argument if the invariants do not hold.
  void validate() const;
};

/// Per-element Gaussian prediction. Tensors are C x H x W or B x C x H x W.
struct GaussianImage {
  torch::Tensor mean;
  torch::Tensor log_variance;

  torch::Tensor variance() const { return log_variance.exp(); }

  /// Checks shapes, the [0, 1] mean range and the log-variance clamp.
  void validate() const;
};

struct FeatureLayer {
  std::string id;
  torch::Tensor features;
};

/// Multi-layer feature maps ordered shallow to deep.
struct FeatureStack {
  std::vector<FeatureLayer> layers;

  size_t size() const { return layers.size(); }
  bool empty() const { return layers.empty(); }

  /// Nonempty, unique ids.
  void validate() const;
};

}  // namespace vidpred
