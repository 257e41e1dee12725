#include "vidpred/losses.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vidpred {
namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    std::ostringstream msg;
    msg << what << ": shape mismatch " << a.sizes() << " vs " << b.sizes();
    throw std::invalid_argument(msg.str());
  }
}

void require_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("alpha must lie in [0, 1]");
  }
}

// Per element, with s = log sigma^2 and e = x - mu:
//   l = (e^2 + alpha) exp(-s) + s
//   dl/dmu = -2 e exp(-s)
//   dl/ds  = 1 - (e^2 + alpha) exp(-s)
// The alpha == 0 branch skips the penalty entirely so the NLL is reproduced bit for bit.
class UncertaintyLossFn : public torch::autograd::Function<UncertaintyLossFn> {
 public:
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, const torch::Tensor& mean,
                               const torch::Tensor& log_variance, const torch::Tensor& target,
                               double alpha) {
    ctx->save_for_backward({mean, log_variance, target});
    ctx->saved_data["alpha"] = alpha;
    const auto inv_var = torch::exp(-log_variance);
    const auto err = target - mean;
    auto sq = err * err;
    if (alpha != 0.0) {
      sq = sq + alpha;
    }
    return (sq * inv_var + log_variance).mean();
  }

  static torch::autograd::variable_list backward(torch::autograd::AutogradContext* ctx,
                                                 torch::autograd::variable_list grad_outputs) {
    const auto saved = ctx->get_saved_variables();
    const auto& mean = saved[0];
    const auto& log_variance = saved[1];
    const auto& target = saved[2];
    const double alpha = ctx->saved_data["alpha"].toDouble();

    const auto scale = grad_outputs[0] / static_cast<double>(mean.numel());
    const auto inv_var = torch::exp(-log_variance);
    const auto err = target - mean;
    auto sq = err * err;
    if (alpha != 0.0) {
      sq = sq + alpha;
    }
    const auto grad_mean = scale * (-2.0) * err * inv_var;
    const auto grad_log_variance = scale * (1.0 - sq * inv_var);
    return {grad_mean, grad_log_variance, -grad_mean, torch::Tensor()};
  }
};

}  // namespace

void LossWeights::validate() const {
  require_alpha(alpha);
  if (!(perceptual_weight >= 0.0) || !(reconstruction_weight >= 0.0) ||
      !(latent_kl_weight >= 0.0)) {
    throw std::invalid_argument("loss weights must be nonnegative");
  }
}

torch::Tensor kl_uncertainty_loss(const GaussianImage& pred, const torch::Tensor& target,
                                  double alpha) {
  require_alpha(alpha);
  require_same_shape(pred.mean, pred.log_variance, "kl_uncertainty_loss(mean, log_variance)");
  require_same_shape(pred.mean, target, "kl_uncertainty_loss(pred, target)");
  return UncertaintyLossFn::apply(pred.mean, pred.log_variance, target, alpha);
}

torch::Tensor kl_uncertainty_terms(const GaussianImage& pred, const torch::Tensor& target,
                                   double alpha) {
  require_alpha(alpha);
  require_same_shape(pred.mean, pred.log_variance, "kl_uncertainty_terms(mean, log_variance)");
  require_same_shape(pred.mean, target, "kl_uncertainty_terms(pred, target)");
  const auto err = target - pred.mean;
  return (err * err + alpha) * torch::exp(-pred.log_variance) + pred.log_variance;
}

torch::Tensor gaussian_nll(const GaussianImage& pred, const torch::Tensor& target) {
  require_same_shape(pred.mean, pred.log_variance, "gaussian_nll(mean, log_variance)");
  require_same_shape(pred.mean, target, "gaussian_nll(pred, target)");
  const auto err = target - pred.mean;
  return (err * err * torch::exp(-pred.log_variance) + pred.log_variance).mean();
}

torch::Tensor kl_gaussians(const torch::Tensor& mu1, const torch::Tensor& var1,
                           const torch::Tensor& mu2, const torch::Tensor& var2) {
  require_same_shape(mu1, var1, "kl_gaussians(mu1, var1)");
  require_same_shape(mu1, mu2, "kl_gaussians(mu1, mu2)");
  require_same_shape(mu1, var2, "kl_gaussians(mu1, var2)");
  if ((var1 <= 0).any().item<bool>() || (var2 <= 0).any().item<bool>()) {
    throw std::invalid_argument("kl_gaussians: variances must be positive");
  }
  const auto diff = mu1 - mu2;
  return 0.5 * torch::log(var2 / var1) + (var1 + diff * diff) / (2.0 * var2) - 0.5;
}

torch::Tensor deep_perceptual_loss(const FeatureStack& pred_features,
                                   const FeatureStack& target_features) {
  pred_features.validate();
  target_features.validate();
  if (pred_features.size() != target_features.size()) {
    throw std::invalid_argument("deep_perceptual_loss: layer count mismatch");
  }
  torch::Tensor sum;
  for (size_t i = 0; i < pred_features.size(); ++i) {
    const auto& p = pred_features.layers[i];
    const auto& t = target_features.layers[i];
    if (p.id != t.id) {
      throw std::invalid_argument("deep_perceptual_loss: layer id mismatch '" + p.id + "' vs '" +
                                  t.id + "'");
    }
    require_same_shape(p.features, t.features, "deep_perceptual_loss");
    auto layer_mse = torch::mse_loss(p.features, t.features);
    sum = sum.defined() ? sum + layer_mse : layer_mse;
  }
  return sum / static_cast<double>(pred_features.size());
}

torch::Tensor latent_kl(const torch::Tensor& mean, const torch::Tensor& log_variance) {
  require_same_shape(mean, log_variance, "latent_kl");
  auto per_dim = 0.5 * (mean * mean + log_variance.exp() - log_variance - 1.0);
  if (per_dim.dim() <= 1) {
    return per_dim.sum();
  }
  return per_dim.sum(-1).mean();
}

LossBreakdown combine_losses(const torch::Tensor& reconstruction, const torch::Tensor& perceptual,
                             const torch::Tensor& latent_kl_term, const LossWeights& weights) {
  weights.validate();
  LossBreakdown out{.total = torch::Tensor(),
                    .reconstruction = reconstruction,
                    .perceptual = perceptual,
                    .latent_kl = latent_kl_term};
  out.total = weights.reconstruction_weight * reconstruction +
              weights.perceptual_weight * perceptual + weights.latent_kl_weight * latent_kl_term;
  return out;
}

LossBreakdown total_loss(const GaussianImage& pred, const torch::Tensor& target,
                         const FeatureStack& pred_features, const FeatureStack& target_features,
                         const torch::Tensor& latent_kl_term, const LossWeights& weights) {
  weights.validate();
  return combine_losses(kl_uncertainty_loss(pred, target, weights.alpha),
                        deep_perceptual_loss(pred_features, target_features), latent_kl_term,
                        weights);
}

}  // namespace vidpred
