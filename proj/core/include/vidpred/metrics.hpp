#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <torch/torch.h>

#include "vidpred/features.hpp"
#include "vidpred/types.hpp"

namespace vidpred {

/// PSNR reported for a zero-error prediction.
inline constexpr double kPsnrCapDb = 100.0;

double mse(const torch::Tensor& pred, const torch::Tensor& target);
double psnr_from_mse(double mse_value, double max_value = 1.0);
double psnr(const torch::Tensor& pred, const torch::Tensor& target, double max_value = 1.0);

/// LPIPS-style distance without learned calibration. At every tap layer the
/// feature vector at each spatial position is divided by its channel L2 norm;
/// the squared differences are summed over channels and averaged over space,
/// then the layer values are averaged. Images are C x H x W.
double perceptual_distance(const torch::Tensor& a, const torch::Tensor& b,
                           const FeatureExtractor& extractor);
double perceptual_distance(const torch::Tensor& a, const torch::Tensor& b, const TapSpec& spec);

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  /// Symmetric with eigenvalues >= -1e-8.
  void validate() const;
};

/// Sample mean and unbiased covariance of at least two vectors.
GaussianStats gaussian_stats(const std::vector<Eigen::VectorXd>& embeddings);

/// |mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}).
///
/// The trace of the square root is the sum of singular values of
/// S1^{1/2} S2^{1/2}. Covariance eigenvalues slightly below zero (within 1e-6
/// relative to the largest) are clamped; anything more negative raises
/// NumericalError.
double frechet_distance(const GaussianStats& p, const GaussianStats& q);

struct MetricEntry {
  std::string name;
  double value = 0.0;
  std::optional<int64_t> horizon;
  std::optional<std::string> embedder_id;
  int64_t sample_count = 0;

  bool operator==(const MetricEntry&) const = default;
};

struct MetricReport {
  std::vector<MetricEntry> entries;
  std::map<std::string, std::string> metadata;

  const MetricEntry* find(const std::string& name,
                          std::optional<int64_t> horizon = std::nullopt) const;
  /// Every FVD entry must carry an embedder id and a horizon.
  void validate() const;

  std::string to_json() const;
  static MetricReport from_json(const std::string& text);
  void save(const std::string& path) const;
  static MetricReport load(const std::string& path);

  bool operator==(const MetricReport&) const = default;
};

struct FvdResult {
  double value = 0.0;
  MetricEntry entry;
  std::vector<Eigen::VectorXd> real_embeddings;
  std::vector<Eigen::VectorXd> pred_embeddings;
};

/// Frechet distance between Gaussians fitted to clip embeddings. Both sets need
/// at least two clips, and every clip must have the same length (the horizon).
FvdResult fvd(const std::vector<FrameSequence>& real_clips,
              const std::vector<FrameSequence>& pred_clips, const VideoEmbedder& embedder);

Eigen::VectorXd to_eigen(const torch::Tensor& vec);

}  // namespace vidpred
