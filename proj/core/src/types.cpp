#include "vidpred/types.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

namespace vidpred {

void FrameSequence::validate() const {
  if (!frames.defined() || frames.dim() != 4) {
    throw std::invalid_argument("FrameSequence: frames must be a T x C x H x W tensor");
  }
  if (frames.size(0) < 1) {
    throw std::invalid_argument("FrameSequence: at least one frame is required");
  }
  if (frames.numel() > 0) {
    const auto lo = frames.min().item<double>();
    const auto hi = frames.max().item<double>();
    if (lo < 0.0 || hi > 1.0) {
      std::ostringstream msg;
      msg << "FrameSequence: pixel values must lie in [0, 1], got [" << lo << ", " << hi << "]";
      throw std::invalid_argument(msg.str());
    }
  }
}

void GaussianImage::validate() const {
  if (!mean.defined() || !log_variance.defined()) {
    throw std::invalid_argument("GaussianImage: mean and log_variance must be defined");
  }
  if (mean.sizes() != log_variance.sizes()) {
    throw std::invalid_argument("GaussianImage: mean and log_variance shapes differ");
  }
  if (mean.numel() == 0) {
    return;
  }
  if (mean.min().item<double>() < 0.0 || mean.max().item<double>() > 1.0) {
    throw std::invalid_argument("GaussianImage: mean outside [0, 1]");
  }
  if (log_variance.min().item<double>() < kMinLogVariance ||
      log_variance.max().item<double>() > kMaxLogVariance) {
    throw std::invalid_argument("GaussianImage: log_variance outside [-7, 7]");
  }
}

void FeatureStack::validate() const {
  if (layers.empty()) {
    throw std::invalid_argument("FeatureStack: stack is empty");
  }
  std::set<std::string> seen;
  for (const auto& layer : layers) {
    if (!seen.insert(layer.id).second) {
      throw std::invalid_argument("FeatureStack: duplicate layer id '" + layer.id + "'");
    }
    if (!layer.features.defined()) {
      throw std::invalid_argument("FeatureStack: layer '" + layer.id + "' has no features");
    }
  }
}

}  // namespace vidpred
