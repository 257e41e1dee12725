#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace vidpred {

enum class SkipKind { None, Residual, Attention };

struct SkipConfig {
  SkipKind kind = SkipKind::Attention;
  /// Feature-map heights (rows) at which skips are placed, e.g. {16} or {16, 32}.
  std::vector<int64_t> resolutions = {16};
  int64_t heads = 1;
  int64_t qk_dim = 32;

  void validate() const;
  bool operator==(const SkipConfig&) const = default;
};

struct AttentionResult {
  torch::Tensor output;
  /// B x heads x (decoder positions) x (encoder positions); rows sum to 1.
  torch::Tensor weights;
};

/// Decoder-side skip block that attends over encoder features of the same
/// resolution. Queries come from the decoder map, keys and values from the
/// encoder map; every query position sees all encoder positions through a
/// scaled dot-product softmax. The attended values pass through an output
/// projection and are added to the decoder features. There is no positional
/// encoding. All projections are bias-free 1x1 convolutions.
class AttentionSkipImpl : public torch::nn::Module {
 public:
  AttentionSkipImpl(int64_t decoder_channels, int64_t encoder_channels, int64_t qk_dim,
                    int64_t heads);

  torch::Tensor forward(const torch::Tensor& decoder_feats, const torch::Tensor& encoder_feats);
  AttentionResult forward_with_weights(const torch::Tensor& decoder_feats,
                                       const torch::Tensor& encoder_feats);

  int64_t heads() const { return heads_; }
  int64_t qk_dim() const { return qk_dim_; }

  torch::nn::Conv2d query{nullptr};
  torch::nn::Conv2d key{nullptr};
  torch::nn::Conv2d value{nullptr};
  torch::nn::Conv2d output{nullptr};

 private:
  int64_t heads_;
  int64_t qk_dim_;
};
TORCH_MODULE(AttentionSkip);

/// Additive skip: decoder + 1x1 projection of the encoder features.
class ResidualSkipImpl : public torch::nn::Module {
 public:
  ResidualSkipImpl(int64_t decoder_channels, int64_t encoder_channels);
  torch::Tensor forward(const torch::Tensor& decoder_feats, const torch::Tensor& encoder_feats);

  torch::nn::Conv2d projection{nullptr};
};
TORCH_MODULE(ResidualSkip);

/// Applies `block` after checking that both maps share a resolution named in `cfg`.
torch::Tensor attention_skip(AttentionSkip& block, const torch::Tensor& decoder_feats,
                             const torch::Tensor& encoder_feats, const SkipConfig& cfg);

}  // namespace vidpred
