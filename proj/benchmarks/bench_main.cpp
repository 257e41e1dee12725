#include <benchmark/benchmark.h>

#include <random>

#include "vidpred/attention.hpp"
#include "vidpred/losses.hpp"
#include "vidpred/metrics.hpp"

using namespace vidpred;

static void BM_KlUncertaintyLoss(benchmark::State& state) {
  torch::set_num_threads(1);
  const auto size = state.range(0);
  auto mu = torch::rand({8, 3, size, size}).requires_grad_();
  auto lv = torch::zeros({8, 3, size, size}).requires_grad_();
  const auto x = torch::rand({8, 3, size, size});
  for (auto _ : state) {
    auto loss = kl_uncertainty_loss({mu, lv}, x, 1.0);
    loss.backward();
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_KlUncertaintyLoss)->Arg(32)->Arg(64);

static void BM_AttentionSkip(benchmark::State& state) {
  torch::set_num_threads(1);
  torch::NoGradGuard g;
  const auto size = state.range(0);
  AttentionSkip block(64, 64, 32, 1);
  const auto dec = torch::randn({4, 64, size, size});
  const auto enc = torch::randn({4, 64, size, size});
  for (auto _ : state) {
    benchmark::DoNotOptimize(block->forward(dec, enc));
  }
}
BENCHMARK(BM_AttentionSkip)->Arg(8)->Arg(16)->Arg(32);

static void BM_FrechetDistance(benchmark::State& state) {
  const auto d = static_cast<int>(state.range(0));
  std::mt19937_64 rng(0);
  std::normal_distribution<double> n;
  auto psd = [&] {
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = n(rng);
    return GaussianStats{Eigen::VectorXd::Zero(d), a * a.transpose()};
  };
  const auto p = psd(), q = psd();
  for (auto _ : state) {
    benchmark::DoNotOptimize(frechet_distance(p, q));
  }
}
BENCHMARK(BM_FrechetDistance)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK_MAIN();
