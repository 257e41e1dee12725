#include "vidpred/predictor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "vidpred/errors.hpp"

namespace vidpred {
namespace {

namespace F = torch::nn::functional;

torch::nn::Conv2d conv(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1) {
  return torch::nn::Conv2d(
      torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2));
}

}  // namespace

std::vector<int64_t> PredictorConfig::level_heights() const {
  std::vector<int64_t> out;
  int64_t h = height;
  for (int64_t i = 0; i <= stages(); ++i) {
    out.push_back(h);
    h /= 2;
  }
  return out;
}

void PredictorConfig::validate() const {
  if (input_frames < 1) {
    throw ConfigError("predictor.input_frames must be >= 1");
  }
  if (channels < 1) {
    throw ConfigError("predictor.channels must be >= 1");
  }
  if (widths.empty()) {
    throw ConfigError("predictor.widths must name at least one stage");
  }
  for (const auto w : widths) {
    if (w < 1) {
      throw ConfigError("predictor.widths must be positive");
    }
  }
  if (latent_dim < 1) {
    throw ConfigError("predictor.latent_dim must be >= 1");
  }
  const int64_t factor = int64_t{1} << stages();
  if (height < factor || width < factor || height % factor != 0 || width % factor != 0) {
    std::ostringstream msg;
    msg << "predictor image size " << height << "x" << width << " must be divisible by "
        << factor << " for " << stages() << " downsampling stages";
    throw ConfigError(msg.str());
  }
  skip.validate();
  if (skip.kind != SkipKind::None) {
    const auto levels = level_heights();
    for (const auto r : skip.resolutions) {
      if (std::find(levels.begin(), levels.end(), r) == levels.end()) {
        throw ConfigError("skip resolution " + std::to_string(r) +
                          " does not match any encoder/decoder feature-map size");
      }
    }
    if (skip.kind == SkipKind::Attention) {
      for (const auto w : widths) {
        if (w % skip.heads != 0) {
          throw ConfigError("predictor.widths must be divisible by skip.heads");
        }
      }
    }
  }
}

ResBlockImpl::ResBlockImpl(int64_t channels) {
  conv1_ = register_module("conv1", conv(channels, channels, 3));
  conv2_ = register_module("conv2", conv(channels, channels, 3));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) {
  return x + conv2_(torch::silu(conv1_(torch::silu(x))));
}

PredictorImpl::PredictorImpl(PredictorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto stages = cfg_.stages();
  heights_ = cfg_.level_heights();
  for (int64_t i = 0; i <= stages; ++i) {
    level_widths_.push_back(cfg_.widths[std::min(i, stages - 1)]);
  }
  bottom_h_ = cfg_.height >> stages;
  bottom_w_ = cfg_.width >> stages;
  const int64_t bottom_numel = level_widths_.back() * bottom_h_ * bottom_w_;

  stem_ = register_module("stem",
                          conv(cfg_.input_frames * cfg_.channels, level_widths_[0], 3));
  for (int64_t i = 0; i <= stages; ++i) {
    enc_blocks_->push_back(ResBlock(level_widths_[i]));
  }
  for (int64_t i = 0; i < stages; ++i) {
    downs_->push_back(conv(level_widths_[i], level_widths_[i + 1], 3, 2));
  }
  register_module("enc_blocks", enc_blocks_);
  register_module("downs", downs_);
  to_latent_ = register_module("to_latent", torch::nn::Linear(bottom_numel, 2 * cfg_.latent_dim));
  from_latent_ = register_module("from_latent", torch::nn::Linear(cfg_.latent_dim, bottom_numel));

  for (int64_t i = 0; i <= stages; ++i) {
    dec_blocks_->push_back(ResBlock(level_widths_[i]));
  }
  for (int64_t i = 0; i < stages; ++i) {
    ups_->push_back(conv(level_widths_[i + 1], level_widths_[i], 3));
  }
  register_module("dec_blocks", dec_blocks_);
  register_module("ups", ups_);

  if (cfg_.skip.kind != SkipKind::None) {
    for (const auto r : cfg_.skip.resolutions) {
      const auto level = std::find(heights_.begin(), heights_.end(), r) - heights_.begin();
      const auto ch = level_widths_[level];
      const auto name = "skip_" + std::to_string(r);
      if (cfg_.skip.kind == SkipKind::Attention) {
        attention_skips_.emplace(
            r, register_module(name, AttentionSkip(ch, ch, cfg_.skip.qk_dim, cfg_.skip.heads)));
      } else {
        residual_skips_.emplace(r, register_module(name, ResidualSkip(ch, ch)));
      }
    }
  }
  head_ = register_module("head", conv(level_widths_[0], 2 * cfg_.channels, 3));
}

EncoderOutput PredictorImpl::encode(const torch::Tensor& frames) {
  if (frames.dim() != 4 && frames.dim() != 5) {
    throw std::invalid_argument("encode: expected n x C x H x W or B x n x C x H x W frames");
  }
  const bool batched = frames.dim() == 5;
  const auto x5 = batched ? frames : frames.unsqueeze(0);
  if (x5.size(1) != cfg_.input_frames || x5.size(2) != cfg_.channels ||
      x5.size(3) != cfg_.height || x5.size(4) != cfg_.width) {
    std::ostringstream msg;
    msg << "encode: expected " << cfg_.input_frames << " frames of " << cfg_.channels << "x"
        << cfg_.height << "x" << cfg_.width << ", got " << x5.sizes();
    throw std::invalid_argument(msg.str());
  }
  const auto batch = x5.size(0);
  auto x = stem_(x5.reshape({batch, cfg_.input_frames * cfg_.channels, cfg_.height, cfg_.width}));

  EncoderOutput out;
  const auto stages = cfg_.stages();
  for (int64_t i = 0; i < stages; ++i) {
    x = enc_blocks_[i]->as<ResBlock>()->forward(x);
    out.pyramid.levels[heights_[i]] = x;
    x = downs_[i]->as<torch::nn::Conv2d>()->forward(torch::silu(x));
  }
  x = enc_blocks_[stages]->as<ResBlock>()->forward(x);
  out.pyramid.levels[heights_[stages]] = x;

  const auto stats = to_latent_(torch::silu(x).flatten(1));
  auto mean = stats.narrow(1, 0, cfg_.latent_dim);
  auto log_variance = stats.narrow(1, cfg_.latent_dim, cfg_.latent_dim);
  torch::Tensor sample = mean;
  if (sampling()) {
    const auto eps = torch::randn(mean.sizes(), generator_, mean.options());
    sample = mean + torch::exp(0.5 * log_variance) * eps;
  }
  if (!batched) {
    out.latent = {mean.squeeze(0), log_variance.squeeze(0), sample.squeeze(0)};
  } else {
    out.latent = {mean, log_variance, sample};
  }
  return out;
}

torch::Tensor PredictorImpl::apply_skip(int64_t height, const torch::Tensor& x,
                                        const FeaturePyramid& pyramid) {
  if (cfg_.skip.kind == SkipKind::None) {
    return x;
  }
  const auto& res = cfg_.skip.resolutions;
  if (std::find(res.begin(), res.end(), height) == res.end()) {
    return x;
  }
  auto it = pyramid.levels.find(height);
  if (it == pyramid.levels.end()) {
    throw std::invalid_argument("decode: pyramid lacks the " + std::to_string(height) +
                                "-row encoder map required by the skip config");
  }
  if (cfg_.skip.kind == SkipKind::Attention) {
    return attention_skips_.at(height)->forward(x, it->second);
  }
  return residual_skips_.at(height)->forward(x, it->second);
}

GaussianImage PredictorImpl::decode(const LatentSample& latent, const FeaturePyramid& pyramid) {
  auto z = latent.sample;
  if (z.dim() == 1) {
    z = z.unsqueeze(0);
  }
  if (z.dim() != 2 || z.size(1) != cfg_.latent_dim) {
    throw std::invalid_argument("decode: latent sample has the wrong shape");
  }
  const auto stages = cfg_.stages();
  const auto batch = z.size(0);
  auto x = from_latent_(z).view({batch, level_widths_[stages], bottom_h_, bottom_w_});
  x = apply_skip(heights_[stages], x, pyramid);
  x = dec_blocks_[stages]->as<ResBlock>()->forward(x);
  for (int64_t i = stages - 1; i >= 0; --i) {
    x = F::interpolate(x, F::InterpolateFuncOptions()
                              .scale_factor(std::vector<double>{2.0, 2.0})
                              .mode(torch::kNearest));
    x = ups_[i]->as<torch::nn::Conv2d>()->forward(torch::silu(x));
    x = apply_skip(heights_[i], x, pyramid);
    x = dec_blocks_[i]->as<ResBlock>()->forward(x);
  }
  const auto out = head_(torch::silu(x));
  GaussianImage image;
  image.mean = torch::sigmoid(out.narrow(1, 0, cfg_.channels));
  image.log_variance =
      kMaxLogVariance * torch::tanh(out.narrow(1, cfg_.channels, cfg_.channels) / kMaxLogVariance);
  return image;
}

Prediction PredictorImpl::predict_next(const torch::Tensor& frames) {
  auto enc = encode(frames);
  auto image = decode(enc.latent, enc.pyramid);
  if (frames.dim() == 4) {
    image.mean = image.mean.squeeze(0);
    image.log_variance = image.log_variance.squeeze(0);
  }
  return {image, enc.latent};
}

Rollout PredictorImpl::rollout_gaussian(const torch::Tensor& seed, int64_t k) {
  if (k < 1) {
    throw std::invalid_argument("rollout: k must be >= 1");
  }
  if (seed.dim() != 4 && seed.dim() != 5) {
    throw std::invalid_argument("rollout: seed must be T x C x H x W or B x T x C x H x W");
  }
  torch::NoGradGuard no_grad;
  const bool batched = seed.dim() == 5;
  auto window = batched ? seed : seed.unsqueeze(0);
  if (window.size(1) < cfg_.input_frames) {
    throw std::invalid_argument("rollout: seed needs " + std::to_string(cfg_.input_frames) +
                                " frames, got " + std::to_string(window.size(1)));
  }
  window = window.narrow(1, window.size(1) - cfg_.input_frames, cfg_.input_frames);

  std::vector<torch::Tensor> means;
  std::vector<torch::Tensor> log_vars;
  for (int64_t step = 0; step < k; ++step) {
    const auto pred = predict_next(window).image;
    means.push_back(pred.mean);
    log_vars.push_back(pred.log_variance);
    window = torch::cat({window.narrow(1, 1, cfg_.input_frames - 1), pred.mean.unsqueeze(1)}, 1);
  }
  Rollout out{torch::stack(means, 1), torch::stack(log_vars, 1)};
  if (!batched) {
    out.means = out.means.squeeze(0);
    out.log_variances = out.log_variances.squeeze(0);
  }
  return out;
}

torch::Tensor PredictorImpl::rollout(const torch::Tensor& seed, int64_t k) {
  return rollout_gaussian(seed, k).means;
}

void copy_matching_parameters(torch::nn::Module& dst, const torch::nn::Module& src) {
  torch::NoGradGuard no_grad;
  const auto src_params = src.named_parameters(true);
  for (auto& item : dst.named_parameters(true)) {
    const auto* other = src_params.find(item.key());
    if (other != nullptr && other->sizes() == item.value().sizes()) {
      item.value().copy_(*other);
    }
  }
}

}  // namespace vidpred
