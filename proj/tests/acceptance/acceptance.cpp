// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <torch/torch.h>
#include <fcntl.h>
#include <unistd.h>

#include "commands.hpp"
#include "support.hpp"
#include "vidpred/attention.hpp"
#include "vidpred/data.hpp"
#include "vidpred/features.hpp"
#include "vidpred/losses.hpp"
#include "vidpred/metrics.hpp"
#include "vidpred/predictor.hpp"
#include "vidpred/training.hpp"

using namespace vidpred;
using vidpred::testing::numeric_gradient;
using vidpred::testing::relative_error;
using vidpred::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1. argmin over sigma^2 of the per-pixel loss is e^2 + alpha
Outcome loss_minimizer() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> err2(0.01, 4.0), alpha(0.0, 1.0);
  const auto grid = torch::arange(1, 100001, torch::kFloat64) * 1e-4;  // 1e-4 .. 10
  Outcome out;
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double e2 = err2(rng);
    const double a = i < 10 ? 0.0 : alpha(rng);
    const auto n = grid.size(0);
    GaussianImage pred{torch::zeros({n}, torch::kFloat64), grid.log()};
    const auto target = torch::full({n}, std::sqrt(e2), torch::kFloat64);
    const auto terms = kl_uncertainty_terms(pred, target, a);
    const double best = grid[terms.argmin().item<int64_t>()].item<double>();
    worst = std::max(worst, std::abs(best - (e2 + a)));
    if (std::abs(best - (e2 + a)) > 1e-3) out.pass = false;
    if (a > 0.0 && best < a) out.pass = false;
    if (a == 0.0 && std::abs(best - e2) > 1e-3) out.pass = false;
  }
  const double t = seconds_since(t0);
  if (t >= 10.0) out.pass = false;
  out.detail = "max |argmin - (e2+alpha)| = " + fmt("%.2e", worst) + ", " + fmt("%.2f s", t);
  return out;
}

// 2. analytic vs central-difference gradients
Outcome gradients() {
  const auto t0 = Clock::now();
  torch::manual_seed(2);
  auto mu = torch::rand({3, 8, 8}, torch::kFloat64).requires_grad_();
  auto lv = (torch::rand({3, 8, 8}, torch::kFloat64) - 0.5).requires_grad_();
  const auto x = torch::rand({3, 8, 8}, torch::kFloat64);
  double worst = 0.0;

  auto check = [&](const std::function<torch::Tensor(const torch::Tensor&, const torch::Tensor&)>& f) {
    const auto g = torch::autograd::grad({f(mu, lv)}, {mu, lv});
    auto fm = [&](const torch::Tensor& m) { return f(m, lv.detach()).item<double>(); };
    auto fl = [&](const torch::Tensor& l) { return f(mu.detach(), l).item<double>(); };
    worst = std::max(worst, relative_error(g[0], numeric_gradient(fm, mu)));
    worst = std::max(worst, relative_error(g[1], numeric_gradient(fl, lv)));
  };
  check([&](const torch::Tensor& m, const torch::Tensor& l) { return gaussian_nll({m, l}, x); });
  for (double a : {0.0, 0.5, 1.0}) {
    check([&](const torch::Tensor& m, const torch::Tensor& l) {
      return kl_uncertainty_loss({m, l}, x, a);
    });
  }

  TapSpec taps;
  taps.tap_layers = {"conv1", "conv2"};
  const FeatureExtractor fx(taps);
  const auto target_features = fx.extract(x);
  auto img = torch::rand({3, 8, 8}, torch::kFloat64).requires_grad_();
  const auto g = torch::autograd::grad({deep_perceptual_loss(fx.extract(img), target_features)},
                                       {img});
  auto fp = [&](const torch::Tensor& v) {
    return deep_perceptual_loss(fx.extract(v), target_features).item<double>();
  };
  worst = std::max(worst, relative_error(g[0], numeric_gradient(fp, img)));

  const double t = seconds_since(t0);
  return {worst < 1e-4 && t < 30.0,
          "max relative error " + fmt("%.2e", worst) + ", " + fmt("%.2f s", t)};
}

// 3. 2 KL + 1 equals the alpha = 1 loss; alpha = 0 equals the NLL bitwise
Outcome kl_identity() {
  torch::manual_seed(3);
  const auto x = torch::rand({1000}, torch::kFloat64);
  const auto mu = torch::rand({1000}, torch::kFloat64);
  const auto lv = torch::rand({1000}, torch::kFloat64) * 8.0 - 4.0;
  const auto kl = kl_gaussians(x, torch::ones_like(x), mu, lv.exp());
  const auto terms = kl_uncertainty_terms({mu, lv}, x, 1.0);
  const double gap = (2.0 * kl + 1.0 - terms).abs().max().item<double>();
  bool bitwise = true;
  for (auto dtype : {torch::kFloat32, torch::kFloat64}) {
    GaussianImage p{mu.to(dtype), lv.to(dtype)};
    bitwise = bitwise && torch::equal(kl_uncertainty_loss(p, x.to(dtype), 0.0),
                                      gaussian_nll(p, x.to(dtype)));
  }
  return {gap <= 1e-10 && bitwise, "max |2KL+1 - loss| = " + fmt("%.2e", gap) +
                                       (bitwise ? ", alpha=0 bitwise equal" : ", alpha=0 differs")};
}

void set_weight(torch::nn::Conv2d& conv, const torch::Tensor& w) {
  torch::NoGradGuard g;
  conv->weight.copy_(w.view(conv->weight.sizes()));
}

// 4. attention skip laws
Outcome attention_laws() {
  torch::manual_seed(4);
  Outcome out;
  std::ostringstream detail;

  AttentionSkip block(6, 5, 4, 2);
  block->to(torch::kFloat64);
  const auto dec = torch::randn({2, 6, 4, 4}, torch::kFloat64);
  const auto enc = torch::randn({2, 5, 4, 4}, torch::kFloat64);
  const auto r = block->forward_with_weights(dec, enc);
  const double row_gap = (r.weights.sum(-1) - 1.0).abs().max().item<double>();
  out.pass = out.pass && row_gap <= 1e-6 && r.weights.min().item<double>() >= 0.0;
  detail << "row sums " << fmt("%.1e", row_gap);

  AttentionSkip uniform(6, 5, 4, 1);
  uniform->to(torch::kFloat64);
  set_weight(uniform->query, torch::zeros_like(uniform->query->weight));
  torch::Tensor mean_gap;
  {
    torch::NoGradGuard g;
    const auto got = uniform->forward(dec, enc);
    const auto mean_value = uniform->value(enc).mean({2, 3}, true).expand({2, 6, 4, 4});
    mean_gap = (got - (dec + uniform->output(mean_value))).abs().max();
  }
  out.pass = out.pass && mean_gap.item<double>() <= 1e-6;
  detail << ", uniform " << fmt("%.1e", mean_gap.item<double>());

  AttentionSkip zv(6, 5, 4, 2), zo(6, 5, 4, 2);
  zv->to(torch::kFloat64);
  zo->to(torch::kFloat64);
  set_weight(zv->value, torch::zeros_like(zv->value->weight));
  set_weight(zo->output, torch::zeros_like(zo->output->weight));
  const bool identity = torch::equal(zv->forward(dec, enc), dec) && torch::equal(zo->forward(dec, enc), dec);
  out.pass = out.pass && identity;
  detail << (identity ? ", identity exact" : ", identity broken");

  // brute-force softmax on 2x2 grids with random projections
  double brute_gap = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    AttentionSkip b(3, 3, 2, 1);
    b->to(torch::kFloat64);
    const auto d = torch::randn({1, 3, 2, 2}, torch::kFloat64);
    const auto e = torch::randn({1, 3, 2, 2}, torch::kFloat64);
    const auto res = b->forward_with_weights(d, e);
    const auto wq = b->query->weight.detach().view({2, 3});
    const auto wk = b->key->weight.detach().view({2, 3});
    const auto wv = b->value->weight.detach().view({3, 3});
    const auto wo = b->output->weight.detach().view({3, 3});
    for (int q = 0; q < 4; ++q) {
      std::vector<double> logits(4);
      const auto dq = d[0].view({3, 4}).select(1, q);
      const auto query = wq.matmul(dq);
      double mx = -1e300;
      for (int p = 0; p < 4; ++p) {
        const auto key = wk.matmul(e[0].view({3, 4}).select(1, p));
        logits[p] = query.dot(key).item<double>() / std::sqrt(2.0);
        mx = std::max(mx, logits[p]);
      }
      double z = 0.0;
      for (double l : logits) z += std::exp(l - mx);
      auto attended = torch::zeros({3}, torch::kFloat64);
      for (int p = 0; p < 4; ++p) {
        const double w = std::exp(logits[p] - mx) / z;
        brute_gap = std::max(brute_gap, std::abs(res.weights[0][0][q][p].item<double>() - w));
        attended += w * wv.matmul(e[0].view({3, 4}).select(1, p));
      }
      const auto expected = dq + wo.matmul(attended);
      const auto got = res.output[0].view({3, 4}).select(1, q);
      brute_gap = std::max(brute_gap, (got - expected).abs().max().item<double>());
    }
  }
  out.pass = out.pass && brute_gap <= 1e-3;
  detail << ", brute force " << fmt("%.1e", brute_gap);
  out.detail = detail.str();
  return out;
}

std::vector<torch::Tensor> param_grads(Predictor& m, const torch::Tensor& loss) {
  return torch::autograd::grad({loss}, m->parameters(), {}, true, false, true);
}

double grad_gap(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].defined() && !b[i].defined()) continue;
    const auto x = a[i].defined() ? a[i] : torch::zeros_like(b[i]);
    const auto y = b[i].defined() ? b[i] : torch::zeros_like(a[i]);
    worst = std::max(worst, (x - y).abs().max().item<double>());
  }
  return worst;
}

// 5. live fed-back prediction vs a frozen copy
Outcome stop_gradient() {
  torch::manual_seed(5);
  PredictorConfig pc;
  pc.input_frames = 2;
  pc.height = pc.width = 16;
  pc.widths = {8, 16};
  pc.latent_dim = 8;
  pc.skip.resolutions = {8};
  pc.skip.qk_dim = 8;
  Predictor model(pc);
  model->to(torch::kFloat64);
  model->train();
  const auto window = torch::rand({2, 6, 3, 16, 16}, torch::kFloat64);
  const LossWeights weights{0.5, 1.0, 1e-3, 1.0};
  TapSpec taps;
  taps.tap_layers = {"conv1", "conv2"};
  const FeatureExtractor fx(taps);
  const auto n = pc.input_frames;

  double worst = 0.0;
  for (int64_t s : {1, 2, 3}) {
    model->set_generator(at::make_generator<at::CPUGeneratorImpl>(50 + s));
    const auto steps = cycle_forward(model, window, s, weights, &fx);
    const auto live = param_grads(model, steps.back().loss.total);

    model->set_generator(at::make_generator<at::CPUGeneratorImpl>(50 + s));
    auto inputs = window.narrow(1, 0, n);
    torch::Tensor loss;
    for (int64_t j = 0; j <= s; ++j) {
      const auto p = model->predict_next(inputs);
      if (j == s) {
        const auto target = window.select(1, n + j);
        FeatureStack tf;
        {
          torch::NoGradGuard g;
          tf = fx.extract(target);
        }
        loss = total_loss(p.image, target, fx.extract(p.image.mean), tf,
                          latent_kl(p.latent.mean, p.latent.log_variance), weights)
                   .total;
        break;
      }
      const auto frozen = p.image.mean.detach().clone();
      inputs = torch::cat({inputs.narrow(1, 1, n - 1), frozen.unsqueeze(1)}, 1);
    }
    worst = std::max(worst, grad_gap(live, param_grads(model, loss)));
  }
  return {worst <= 1e-10, "max |grad live - grad frozen| = " + fmt("%.2e", worst)};
}

// 6. schedule endpoints
Outcome schedule_endpoints() {
  bool ok = true;
  int checked = 0;
  for (int64_t n : {2, 6}) {
    const auto s = CycleSchedule{}.resolved(n);
    for (int64_t total : {2, 4, 10, 50, 200, 201}) {
      for (int64_t e = 0; e < total; ++e) {
        const auto k = cycle_steps_for_epoch(s, e, total);
        if (2 * e < total && k != 0) ok = false;
      }
      ok = ok && cycle_steps_for_epoch(s, total - 1, total) == n + 1;
      ++checked;
    }
  }
  return {ok, std::to_string(checked) + " (n, epochs) combinations"};
}

// 7. cycle training vs plain training on synthetic sprites
struct ArmResult {
  double rollout_mse = 0.0;
  double one_step_mse = 0.0;
  double seconds = 0.0;
};

constexpr int64_t kInputFrames = 4;
constexpr int64_t kRolloutSteps = 20;

PredictorConfig sprite_predictor() {
  PredictorConfig pc;
  pc.input_frames = kInputFrames;
  pc.channels = 3;
  pc.height = pc.width = 32;
  pc.widths = {16, 32, 32};
  pc.latent_dim = 16;
  pc.skip.kind = SkipKind::Attention;
  pc.skip.resolutions = {16};
  pc.skip.qk_dim = 16;
  return pc;
}

SyntheticSpec sprite_spec(uint64_t seed, int64_t sequences, int64_t length) {
  SyntheticSpec spec;
  spec.num_sequences = sequences;
  spec.length = length;
  spec.size = 32;
  spec.min_sprites = 1;
  spec.max_sprites = 2;
  spec.max_speed = 2;
  spec.seed = seed;
  return spec;
}

ArmResult train_arm(bool cycle, uint64_t seed, const SequenceDataset& train,
                    const SequenceDataset& heldout) {
  const auto t0 = Clock::now();
  TrainConfig tc;
  tc.epochs = 60;
  tc.batch_size = 8;
  tc.windows_per_sequence = 4;
  tc.optimizer.learning_rate = 1e-3;
  tc.loss.perceptual_weight = 0.0;
  tc.loss.latent_kl_weight = 1e-4;
  tc.schedule.enabled = cycle;
  tc.seed = seed;
  torch::set_num_threads(1);
  torch::manual_seed(static_cast<int64_t>(seed));
  Predictor model(sprite_predictor());
  fit(model, train, tc, nullptr);

  ArmResult r;
  torch::NoGradGuard g;
  model->eval();
  const auto n = kInputFrames;
  for (size_t i = 0; i < heldout.num_sequences(); ++i) {
    const auto frames = heldout.frames(i, 0, n + kRolloutSteps);
    const auto rolled = model->rollout(frames.narrow(0, 0, n), kRolloutSteps);
    r.rollout_mse += mse(rolled, frames.narrow(0, n, kRolloutSteps));
    r.one_step_mse += mse(rolled[0], frames[n]);
  }
  r.rollout_mse /= static_cast<double>(heldout.num_sequences());
  r.one_step_mse /= static_cast<double>(heldout.num_sequences());
  r.seconds = seconds_since(t0);
  return r;
}

Outcome cycle_benefit() {
  int wins = 0;
  std::ostringstream detail;
  double slowest = 0.0;
  for (uint64_t seed : {1, 2, 3}) {
    const auto window = 2 * kInputFrames + 2;  // n inputs + n + 1 self-fed steps + target
    const auto train = make_synthetic_dataset(sprite_spec(100 + seed, 64, 24), window, {32, 32});
    const auto heldout = make_synthetic_dataset(sprite_spec(9000 + seed, 16, kInputFrames + kRolloutSteps),
                                                kInputFrames + kRolloutSteps, {32, 32});
    const auto plain = train_arm(false, seed, train, heldout);
    const auto cyc = train_arm(true, seed, train, heldout);
    slowest = std::max({slowest, plain.seconds, cyc.seconds});
    if (cyc.rollout_mse < plain.rollout_mse) ++wins;
    const auto line = "seed " + std::to_string(seed) + ": rollout " +
                      fmt("%.5f", cyc.rollout_mse) + " vs " + fmt("%.5f", plain.rollout_mse) +
                      ", 1-step " + fmt("%.5f", cyc.one_step_mse) + " vs " +
                      fmt("%.5f", plain.one_step_mse);
    detail << line << "; ";
    std::fprintf(stderr, "  cycle vs plain, %s (%.0f s + %.0f s)\n", line.c_str(), cyc.seconds,
                 plain.seconds);
  }
  detail << "cycle wins " << wins << "/3, slowest arm " << fmt("%.0f s", slowest);
  return {wins >= 2 && slowest <= 1800.0, detail.str()};
}

// 8. Frechet distance
GaussianStats gs(Eigen::VectorXd m, Eigen::MatrixXd c) { return {std::move(m), std::move(c)}; }

Outcome frechet() {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 3.0);
  auto vec = [&](int d) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = nd(rng);
    return v;
  };
  double identical = 0.0, closed = 0.0, diag = 0.0, asym = 0.0;
  bool nonneg = true;
  for (int t = 0; t < 100; ++t) {
    const int d = 1 + t % 8;
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = nd(rng);
    const auto p = gs(vec(d), a * a.transpose());
    identical = std::max(identical, frechet_distance(p, p));
  }
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(1, 1), one = Eigen::MatrixXd::Identity(1, 1);
  closed = std::max(closed, std::abs(frechet_distance(gs(Eigen::VectorXd::Zero(1), z),
                                                      gs(Eigen::VectorXd::Constant(1, 3.0), z)) - 9.0));
  closed = std::max(closed, std::abs(frechet_distance(gs(Eigen::VectorXd::Zero(1), one),
                                                      gs(Eigen::VectorXd::Constant(1, 1.0), one)) - 1.0));
  for (int t = 0; t < 200; ++t) {
    const int d = 1 + t % 8;
    Eigen::VectorXd d1(d), d2(d);
    for (int i = 0; i < d; ++i) {
      d1[i] = ud(rng);
      d2[i] = ud(rng);
    }
    const auto m1 = vec(d), m2 = vec(d);
    double expected = (m1 - m2).squaredNorm();
    for (int i = 0; i < d; ++i) expected += std::pow(std::sqrt(d1[i]) - std::sqrt(d2[i]), 2);
    const Eigen::MatrixXd c1 = d1.asDiagonal(), c2 = d2.asDiagonal();
    diag = std::max(diag, std::abs(frechet_distance(gs(m1, c1), gs(m2, c2)) - expected));
  }
  for (int t = 0; t < 1000; ++t) {
    const int d = 2 + t % 6;
    Eigen::MatrixXd a(d, d), b(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        a(i, j) = nd(rng);
        b(i, j) = nd(rng);
      }
    const auto p = gs(vec(d), a * a.transpose()), q = gs(vec(d), b * b.transpose());
    const double pq = frechet_distance(p, q), qp = frechet_distance(q, p);
    nonneg = nonneg && pq >= 0.0 && qp >= 0.0;
    asym = std::max(asym, std::abs(pq - qp) / std::max(1.0, pq));
  }
  const bool ok = identical <= 1e-6 && closed <= 1e-8 && diag <= 1e-8 && asym <= 1e-8 && nonneg;
  return {ok, "identical " + fmt("%.1e", identical) + ", closed forms " + fmt("%.1e", closed) +
                  ", diagonal " + fmt("%.1e", diag) + ", asymmetry " + fmt("%.1e", asym) +
                  (nonneg ? ", nonnegative" : ", NEGATIVE value")};
}

// 9. metric closed forms
Outcome metric_closed_forms() {
  const double p = psnr_from_mse(0.01, 1.0);
  const auto img = torch::rand({3, 32, 32});
  const double cap = psnr(img, img);
  const double self = perceptual_distance(img, img, TapSpec{});
  return {p == 20.0 && cap == 100.0 && self == 0.0,
          "psnr " + fmt("%.17g", p) + " dB, cap " + fmt("%.17g", cap) + " dB, self-distance " +
              fmt("%.1e", self)};
}

// 10. train twice and resume, through the command layer
std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Silences stdout (the training progress lines) while alive.
class QuietStdout {
 public:
  QuietStdout() {
    std::fflush(stdout);
    saved_ = dup(STDOUT_FILENO);
    const int null = open("/dev/null", O_WRONLY);
    dup2(null, STDOUT_FILENO);
    close(null);
  }
  ~QuietStdout() {
    std::fflush(stdout);
    dup2(saved_, STDOUT_FILENO);
    close(saved_);
  }

 private:
  int saved_;
};

Outcome reproducibility() {
  TempDir dir("acceptance");
  const std::string config =
      "seed: 10\n"
      "deterministic: true\n"
      "predictor: {input_frames: 2, channels: 3, height: 16, width: 16, widths: [8, 16],\n"
      "            latent_dim: 8, skip: {kind: attention, resolutions: [8], qk_dim: 8}}\n"
      "train:\n"
      "  epochs: 4\n"
      "  batch_size: 4\n"
      "  checkpoint_every: 2\n"
      "  schedule: {start_fraction: 0.5, max_self_fed_steps: 2}\n"
      "features: {tap_layers: [conv1, conv2]}\n"
      "dataset:\n"
      "  synthetic: {num_sequences: 6, length: 10, seed: 4}\n";
  std::ofstream(dir / "run.yaml") << config;

  auto train = [&](const std::string& out, std::optional<std::string> resume) {
    cli::TrainOptions o;
    o.config_path = (dir / "run.yaml").string();
    o.output_dir = (dir / out).string();
    o.deterministic = true;
    o.resume = std::move(resume);
    QuietStdout quiet;
    return cli::run_train(o);
  };
  if (train("a", std::nullopt) != 0 || train("b", std::nullopt) != 0) {
    return {false, "training failed"};
  }
  const auto a = slurp(dir / "a" / "metrics.jsonl");
  const bool identical = !a.empty() && a == slurp(dir / "b" / "metrics.jsonl");

  fs::create_directories(dir / "c");
  if (train("c", (dir / "a" / "checkpoints" / checkpoint_name(1)).string()) != 0) {
    return {false, "resume failed"};
  }
  // resumed log holds only epochs 2-3; compare with the tail of the full run
  const auto full = read_metric_log((dir / "a" / "metrics.jsonl").string());
  const auto resumed = read_metric_log((dir / "c" / "metrics.jsonl").string());
  const bool resume_ok = full.size() == 4 && resumed.size() == 2 && resumed[0] == full[2] &&
                         resumed[1] == full[3];
  return {identical && resume_ok, std::string(identical ? "byte-identical logs" : "logs differ") +
                                      (resume_ok ? ", resume matches" : ", resume differs")};
}

}  // namespace

int main(int argc, char** argv) {
  // optional criterion ids restrict the run, e.g. `vidpred_acceptance 1 7`
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria = {
      {1, "loss minimiser", loss_minimizer},
      {2, "gradient correctness", gradients},
      {3, "KL identity", kl_identity},
      {4, "attention skip laws", attention_laws},
      {5, "stop-gradient", stop_gradient},
      {6, "cycle schedule endpoints", schedule_endpoints},
      {7, "cycle training benefit", cycle_benefit},
      {8, "Frechet exactness", frechet},
      {9, "metric closed forms", metric_closed_forms},
      {10, "reproducibility", reproducibility},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d: %s  %s  (%s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
