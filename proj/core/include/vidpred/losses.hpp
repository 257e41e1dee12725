#pragma once

#include <torch/torch.h>

#include "vidpred/types.hpp"

namespace vidpred {

/// Weights used to combine the training objectives.
struct LossWeights {
  double perceptual_weight = 1.0;
  double reconstruction_weight = 1.0;
  double latent_kl_weight = 1e-4;
  /// Scale of the 1/sigma^2 confidence penalty, in [0, 1]. 0 gives the plain NLL.
  double alpha = 1.0;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// Gaussian negative log-likelihood averaged over all elements:
///   mean[(x - mu)^2 / sigma^2 + log sigma^2]
/// Differentiable in `pred.mean` and `pred.log_variance`.
torch::Tensor gaussian_nll(const GaussianImage& pred, const torch::Tensor& target);

/// Elementwise KL(N(mu1, var1) || N(mu2, var2)). Variances must be > 0.
torch::Tensor kl_gaussians(const torch::Tensor& mu1, const torch::Tensor& var1,
                           const torch::Tensor& mu2, const torch::Tensor& var2);

/// Alpha-regularised uncertainty loss averaged over all elements:
///   mean[(x - mu)^2 / sigma^2 + log sigma^2 + alpha / sigma^2]
///
/// For a fixed squared error e^2 the per-element minimiser is
/// sigma^2 = e^2 + alpha, so alpha > 0 keeps the predicted variance away from
/// zero. With alpha = 1 this is 2 KL(N(x, 1) || N(mu, sigma^2)) + 1.
/// alpha = 0 evaluates exactly as gaussian_nll.
torch::Tensor kl_uncertainty_loss(const GaussianImage& pred, const torch::Tensor& target,
                                  double alpha);

/// Unreduced per-element terms of kl_uncertainty_loss.
torch::Tensor kl_uncertainty_terms(const GaussianImage& pred, const torch::Tensor& target,
                                   double alpha);

/// Mean over layers of the per-layer feature MSE.
torch::Tensor deep_perceptual_loss(const FeatureStack& pred_features,
                                   const FeatureStack& target_features);

/// KL of the encoder posterior N(mean, exp(log_variance)) from N(0, I), summed
/// over latent dimensions and averaged over the batch.
torch::Tensor latent_kl(const torch::Tensor& mean, const torch::Tensor& log_variance);

/// Loss terms before weighting plus the weighted total.
struct LossBreakdown {
  torch::Tensor total;
  torch::Tensor reconstruction;
  torch::Tensor perceptual;
  torch::Tensor latent_kl;
};

LossBreakdown total_loss(const GaussianImage& pred, const torch::Tensor& target,
                         const FeatureStack& pred_features,
                         const FeatureStack& target_features,
                         const torch::Tensor& latent_kl_term, const LossWeights& weights);

/// Combines precomputed terms. Used when a term is disabled (zero weight).
LossBreakdown combine_losses(const torch::Tensor& reconstruction,
                             const torch::Tensor& perceptual,
                             const torch::Tensor& latent_kl_term, const LossWeights& weights);

}  // namespace vidpred
