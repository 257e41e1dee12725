#include "vidpred/attention.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vidpred/errors.hpp"

namespace vidpred {
namespace {

torch::nn::Conv2d pointwise(int64_t in, int64_t out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1).bias(false));
}

void require_same_resolution(const torch::Tensor& dec, const torch::Tensor& enc) {
  if (dec.dim() != 4 || enc.dim() != 4) {
    throw std::invalid_argument("skip block: expected B x C x H x W feature maps");
  }
  if (dec.size(0) != enc.size(0) || dec.size(2) != enc.size(2) || dec.size(3) != enc.size(3)) {
    std::ostringstream msg;
    msg << "skip block: resolution mismatch, decoder " << dec.sizes() << " vs encoder "
        << enc.sizes();
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

void SkipConfig::validate() const {
  if (heads < 1) {
    throw ConfigError("skip.heads must be >= 1");
  }
  if (qk_dim < 1 || qk_dim % heads != 0) {
    throw ConfigError("skip.qk_dim must be positive and divisible by skip.heads");
  }
  for (const auto r : resolutions) {
    if (r < 1) {
      throw ConfigError("skip.resolutions must be positive");
    }
  }
}

AttentionSkipImpl::AttentionSkipImpl(int64_t decoder_channels, int64_t encoder_channels,
                                     int64_t qk_dim, int64_t heads)
    : heads_(heads), qk_dim_(qk_dim) {
  if (heads < 1 || qk_dim % heads != 0 || decoder_channels % heads != 0) {
    throw std::invalid_argument(
        "attention skip: qk_dim and decoder channels must be divisible by heads");
  }
  query = register_module("query", pointwise(decoder_channels, qk_dim));
  key = register_module("key", pointwise(encoder_channels, qk_dim));
  value = register_module("value", pointwise(encoder_channels, decoder_channels));
  output = register_module("output", pointwise(decoder_channels, decoder_channels));
}

AttentionResult AttentionSkipImpl::forward_with_weights(const torch::Tensor& decoder_feats,
                                                        const torch::Tensor& encoder_feats) {
  require_same_resolution(decoder_feats, encoder_feats);
  const auto batch = decoder_feats.size(0);
  const auto channels = decoder_feats.size(1);
  const auto h = decoder_feats.size(2);
  const auto w = decoder_feats.size(3);
  const auto positions = h * w;
  const auto dk = qk_dim_ / heads_;
  const auto dv = channels / heads_;

  // B x heads x N x d
  auto q = query(decoder_feats).view({batch, heads_, dk, positions}).transpose(2, 3);
  auto k = key(encoder_feats).view({batch, heads_, dk, positions});
  auto v = value(encoder_feats).view({batch, heads_, dv, positions}).transpose(2, 3);

  auto logits = torch::matmul(q, k) / std::sqrt(static_cast<double>(dk));
  auto weights = torch::softmax(logits, -1);
  auto attended = torch::matmul(weights, v).transpose(2, 3).reshape({batch, channels, h, w});
  return {decoder_feats + output(attended), weights};
}

torch::Tensor AttentionSkipImpl::forward(const torch::Tensor& decoder_feats,
                                         const torch::Tensor& encoder_feats) {
  return forward_with_weights(decoder_feats, encoder_feats).output;
}

ResidualSkipImpl::ResidualSkipImpl(int64_t decoder_channels, int64_t encoder_channels) {
  projection = register_module("projection", pointwise(encoder_channels, decoder_channels));
}

torch::Tensor ResidualSkipImpl::forward(const torch::Tensor& decoder_feats,
                                        const torch::Tensor& encoder_feats) {
  require_same_resolution(decoder_feats, encoder_feats);
  return decoder_feats + projection(encoder_feats);
}

torch::Tensor attention_skip(AttentionSkip& block, const torch::Tensor& decoder_feats,
                             const torch::Tensor& encoder_feats, const SkipConfig& cfg) {
  require_same_resolution(decoder_feats, encoder_feats);
  const auto r = decoder_feats.size(2);
  if (std::find(cfg.resolutions.begin(), cfg.resolutions.end(), r) == cfg.resolutions.end()) {
    throw std::invalid_argument("attention_skip: resolution " + std::to_string(r) +
                                " is not configured");
  }
  return block->forward(decoder_feats, encoder_feats);
}

}  // namespace vidpred
