#include "vidpred/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vidpred/errors.hpp"

namespace vidpred {
namespace {

using nlohmann::json;

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    std::ostringstream msg;
    msg << what << ": shape mismatch " << a.sizes() << " vs " << b.sizes();
    throw std::invalid_argument(msg.str());
  }
}

// Symmetric PSD square root. Eigenvalues below zero by more than 1e-6 of the
// largest raise NumericalError; eigenvalues within rounding of zero are zeroed
// so rank-deficient covariances do not pick up sqrt(eps)-sized noise.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("covariance eigendecomposition failed");
  }
  Eigen::VectorXd ev = solver.eigenvalues();
  const double largest = ev.size() > 0 ? ev.cwiseAbs().maxCoeff() : 0.0;
  const double zero_tol =
      static_cast<double>(ev.size()) * std::numeric_limits<double>::epsilon() * largest;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-6 * std::max(1.0, largest)) {
      std::ostringstream msg;
      msg << "covariance is not positive semi-definite (eigenvalue " << ev[i] << ")";
      throw NumericalError(msg.str());
    }
    if (ev[i] <= zero_tol) ev[i] = 0.0;
  }
  return solver.eigenvectors() * ev.cwiseSqrt().asDiagonal() * solver.eigenvectors().transpose();
}

json entry_to_json(const MetricEntry& e) {
  json j = {{"name", e.name}, {"value", e.value}, {"sample_count", e.sample_count}};
  j["horizon"] = e.horizon ? json(*e.horizon) : json(nullptr);
  j["embedder_id"] = e.embedder_id ? json(*e.embedder_id) : json(nullptr);
  return j;
}

MetricEntry entry_from_json(const json& j) {
  MetricEntry e;
  e.name = j.at("name").get<std::string>();
  e.value = j.at("value").get<double>();
  e.sample_count = j.at("sample_count").get<int64_t>();
  if (j.contains("horizon") && !j["horizon"].is_null()) {
    e.horizon = j["horizon"].get<int64_t>();
  }
  if (j.contains("embedder_id") && !j["embedder_id"].is_null()) {
    e.embedder_id = j["embedder_id"].get<std::string>();
  }
  return e;
}

}  // namespace

double mse(const torch::Tensor& pred, const torch::Tensor& target) {
  require_same_shape(pred, target, "mse");
  const auto d = pred.to(torch::kDouble) - target.to(torch::kDouble);
  return (d * d).mean().item<double>();
}

double psnr_from_mse(double mse_value, double max_value) {
  if (!(max_value > 0.0)) {
    throw std::invalid_argument("psnr: max_value must be positive");
  }
  if (mse_value < 0.0) {
    throw std::invalid_argument("psnr: mse must be nonnegative");
  }
  if (mse_value == 0.0) {
    return kPsnrCapDb;
  }
  return 10.0 * std::log10(max_value * max_value / mse_value);
}

double psnr(const torch::Tensor& pred, const torch::Tensor& target, double max_value) {
  return psnr_from_mse(mse(pred, target), max_value);
}

double perceptual_distance(const torch::Tensor& a, const torch::Tensor& b,
                           const FeatureExtractor& extractor) {
  require_same_shape(a, b, "perceptual_distance");
  torch::NoGradGuard no_grad;
  const auto fa = extractor.extract(a.to(torch::kDouble));
  const auto fb = extractor.extract(b.to(torch::kDouble));
  double total = 0.0;
  for (size_t l = 0; l < fa.size(); ++l) {
    // channel axis is 0 for unbatched stacks
    const auto& xa = fa.layers[l].features;
    const auto& xb = fb.layers[l].features;
    const int64_t ch = xa.dim() - 3;
    const auto na = xa / (xa.pow(2).sum(ch, true).sqrt() + 1e-10);
    const auto nb = xb / (xb.pow(2).sum(ch, true).sqrt() + 1e-10);
    total += (na - nb).pow(2).sum(ch).mean().item<double>();
  }
  return total / static_cast<double>(fa.size());
}

double perceptual_distance(const torch::Tensor& a, const torch::Tensor& b, const TapSpec& spec) {
  return perceptual_distance(a, b, FeatureExtractor(spec));
}

void GaussianStats::validate() const {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw std::invalid_argument("GaussianStats: covariance must be d x d");
  }
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NumericalError("GaussianStats: covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance, Eigen::EigenvaluesOnly);
  if (solver.eigenvalues().size() > 0 && solver.eigenvalues().minCoeff() < -1e-8 * scale) {
    throw NumericalError("GaussianStats: covariance is not positive semi-definite");
  }
}

GaussianStats gaussian_stats(const std::vector<Eigen::VectorXd>& embeddings) {
  if (embeddings.size() < 2) {
    throw std::invalid_argument("gaussian_stats: need at least two embeddings");
  }
  const auto d = embeddings.front().size();
  const auto n = static_cast<Eigen::Index>(embeddings.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (embeddings[static_cast<size_t>(i)].size() != d) {
      throw std::invalid_argument("gaussian_stats: embeddings differ in dimension");
    }
    x.row(i) = embeddings[static_cast<size_t>(i)].transpose();
  }
  GaussianStats out;
  out.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - out.mean.transpose();
  out.covariance = (centered.transpose() * centered) / static_cast<double>(n - 1);
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

double frechet_distance(const GaussianStats& p, const GaussianStats& q) {
  if (p.mean.size() != q.mean.size() || p.covariance.rows() != q.covariance.rows()) {
    throw std::invalid_argument("frechet_distance: dimension mismatch");
  }
  const double mean_term = (p.mean - q.mean).squaredNorm();
  // Tr (S1 S2)^{1/2} is the nuclear norm of S1^{1/2} S2^{1/2}
  const Eigen::MatrixXd cross = psd_sqrt(p.covariance) * psd_sqrt(q.covariance);
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(cross);
  const double trace_sqrt = svd.singularValues().sum();
  const double value = mean_term + p.covariance.trace() + q.covariance.trace() - 2.0 * trace_sqrt;
  return std::max(0.0, value);
}

Eigen::VectorXd to_eigen(const torch::Tensor& vec) {
  const auto v = vec.detach().to(torch::kDouble).contiguous().view(-1);
  return Eigen::Map<const Eigen::VectorXd>(v.data_ptr<double>(), v.numel());
}

FvdResult fvd(const std::vector<FrameSequence>& real_clips,
              const std::vector<FrameSequence>& pred_clips, const VideoEmbedder& embedder) {
  if (real_clips.size() < 2 || pred_clips.size() < 2) {
    throw std::invalid_argument("fvd: need at least two clips in each set");
  }
  const auto horizon = real_clips.front().length();
  auto check = [&](const std::vector<FrameSequence>& clips) {
    for (const auto& c : clips) {
      if (c.length() != horizon) {
        throw std::invalid_argument("fvd: clips must all have the same length");
      }
    }
  };
  check(real_clips);
  check(pred_clips);

  FvdResult out;
  for (const auto& c : real_clips) {
    out.real_embeddings.push_back(to_eigen(embedder.embed(c)));
  }
  for (const auto& c : pred_clips) {
    out.pred_embeddings.push_back(to_eigen(embedder.embed(c)));
  }
  out.value = frechet_distance(gaussian_stats(out.real_embeddings),
                               gaussian_stats(out.pred_embeddings));
  out.entry.name = "fvd";
  out.entry.value = out.value;
  out.entry.horizon = horizon;
  out.entry.embedder_id = embedder.id();
  out.entry.sample_count = static_cast<int64_t>(pred_clips.size());
  return out;
}

const MetricEntry* MetricReport::find(const std::string& name,
                                      std::optional<int64_t> horizon) const {
  for (const auto& e : entries) {
    if (e.name == name && (!horizon || e.horizon == horizon)) {
      return &e;
    }
  }
  return nullptr;
}

void MetricReport::validate() const {
  for (const auto& e : entries) {
    if (e.name == "fvd" && (!e.horizon || !e.embedder_id)) {
      throw std::invalid_argument("MetricReport: fvd entries need a horizon and an embedder id");
    }
  }
}

std::string MetricReport::to_json() const {
  json j;
  j["entries"] = json::array();
  for (const auto& e : entries) {
    j["entries"].push_back(entry_to_json(e));
  }
  j["metadata"] = metadata;
  return j.dump(2) + "\n";
}

MetricReport MetricReport::from_json(const std::string& text) {
  MetricReport r;
  try {
    const auto j = json::parse(text);
    for (const auto& e : j.at("entries")) {
      r.entries.push_back(entry_from_json(e));
    }
    if (j.contains("metadata")) {
      r.metadata = j["metadata"].get<std::map<std::string, std::string>>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed metric report: ") + e.what());
  }
  r.validate();
  return r;
}

void MetricReport::save(const std::string& path) const {
  validate();
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write metric report '" + path + "'");
  }
  out << to_json();
}

MetricReport MetricReport::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read metric report '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace vidpred
