#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "support.hpp"
#include "vidpred/attention.hpp"

using namespace vidpred;

namespace {

AttentionSkip make_block(int64_t dec, int64_t enc, int64_t qk, int64_t heads, uint64_t seed) {
  torch::manual_seed(static_cast<int64_t>(seed));
  AttentionSkip block(dec, enc, qk, heads);
  block->to(torch::kFloat64);
  return block;
}

void set_weight(torch::nn::Conv2d& conv, const torch::Tensor& w) {
  torch::NoGradGuard g;
  conv->weight.copy_(w.view(conv->weight.sizes()));
}

}  // namespace

TEST(AttentionSkip, RowsAreStochastic) {
  for (int64_t heads : {1, 2}) {
    auto block = make_block(8, 6, 4, heads, 1);
    auto dec = torch::randn({2, 8, 5, 5}, torch::kFloat64);
    auto enc = torch::randn({2, 6, 5, 5}, torch::kFloat64);
    const auto r = block->forward_with_weights(dec, enc);
    EXPECT_EQ(r.weights.sizes(), (std::vector<int64_t>{2, heads, 25, 25}));
    EXPECT_LT((r.weights.sum(-1) - 1.0).abs().max().item<double>(), 1e-6);
    EXPECT_GE(r.weights.min().item<double>(), 0.0);
    EXPECT_EQ(r.output.sizes(), dec.sizes());
  }
}

TEST(AttentionSkip, ZeroQueryGivesSpatialMeanOfValues) {
  auto block = make_block(4, 3, 4, 1, 2);
  set_weight(block->query, torch::zeros_like(block->query->weight));
  auto dec = torch::randn({1, 4, 3, 3}, torch::kFloat64);
  auto enc = torch::randn({1, 3, 3, 3}, torch::kFloat64);
  const auto out = block->forward(dec, enc);
  torch::NoGradGuard g;
  const auto mean_value = block->value(enc).mean({2, 3}, true);  // 1 x 4 x 1 x 1
  const auto expected = dec + block->output(mean_value.expand({1, 4, 3, 3}));
  EXPECT_LT((out - expected).abs().max().item<double>(), 1e-6);
}

TEST(AttentionSkip, ZeroValueOrOutputIsIdentity) {
  auto dec = torch::randn({2, 4, 4, 4}, torch::kFloat64);
  auto enc = torch::randn({2, 4, 4, 4}, torch::kFloat64);
  auto a = make_block(4, 4, 4, 1, 3);
  set_weight(a->value, torch::zeros_like(a->value->weight));
  EXPECT_TRUE(torch::equal(a->forward(dec, enc), dec));
  auto b = make_block(4, 4, 4, 2, 4);
  set_weight(b->output, torch::zeros_like(b->output->weight));
  EXPECT_TRUE(torch::equal(b->forward(dec, enc), dec));
}

TEST(AttentionSkip, DominantLogitOnTwoByTwoGrid) {
  // 2 channels, identity projections. Query (1, 0) everywhere; encoder
  // position 2 carries key (20, 0), the rest (0, 0): logit margin 20/sqrt(2) > 10.
  auto block = make_block(2, 2, 2, 1, 5);
  const auto eye = torch::eye(2, torch::kFloat64);
  set_weight(block->query, eye);
  set_weight(block->key, eye);
  set_weight(block->value, eye);
  set_weight(block->output, eye);
  auto dec = torch::zeros({1, 2, 2, 2}, torch::kFloat64);
  dec.select(1, 0).fill_(1.0);
  auto enc = torch::zeros({1, 2, 2, 2}, torch::kFloat64);
  enc[0][0][1][0] = 20.0;  // flattened position 2
  enc[0][1][0][1] = 3.0;   // position 1 has a distinct value but zero key in channel 0

  const auto r = block->forward_with_weights(dec, enc);

  // brute force
  std::array<std::array<double, 2>, 4> keys{}, values{};
  for (int p = 0; p < 4; ++p) {
    for (int c = 0; c < 2; ++c) {
      keys[p][c] = enc[0][c][p / 2][p % 2].item<double>();
      values[p][c] = keys[p][c];
    }
  }
  for (int qpos = 0; qpos < 4; ++qpos) {
    const double q0 = dec[0][0][qpos / 2][qpos % 2].item<double>();
    const double q1 = dec[0][1][qpos / 2][qpos % 2].item<double>();
    std::array<double, 4> logits{};
    double mx = -1e300;
    for (int p = 0; p < 4; ++p) {
      logits[p] = (q0 * keys[p][0] + q1 * keys[p][1]) / std::sqrt(2.0);
      mx = std::max(mx, logits[p]);
    }
    double z = 0.0;
    for (auto& l : logits) z += std::exp(l - mx);
    std::array<double, 2> attended{};
    for (int p = 0; p < 4; ++p) {
      const double w = std::exp(logits[p] - mx) / z;
      EXPECT_NEAR(r.weights[0][0][qpos][p].item<double>(), w, 1e-3);
      for (int c = 0; c < 2; ++c) attended[c] += w * values[p][c];
    }
    for (int c = 0; c < 2; ++c) {
      const double expected = dec[0][c][qpos / 2][qpos % 2].item<double>() + attended[c];
      EXPECT_NEAR(r.output[0][c][qpos / 2][qpos % 2].item<double>(), expected, 1e-3);
      // dominated by the selected value
      const double selected = dec[0][c][qpos / 2][qpos % 2].item<double>() + values[2][c];
      EXPECT_NEAR(r.output[0][c][qpos / 2][qpos % 2].item<double>(), selected, 1e-3);
    }
  }
}

TEST(AttentionSkip, EncoderPermutationPermutesWeights) {
  auto block = make_block(3, 3, 4, 1, 6);
  auto dec = torch::randn({1, 3, 2, 2}, torch::kFloat64);
  auto enc = torch::randn({1, 3, 2, 2}, torch::kFloat64);
  const auto ref = block->forward_with_weights(dec, enc);
  std::array<int64_t, 4> perm{0, 1, 2, 3};
  int count = 0;
  do {
    const auto idx = torch::tensor(std::vector<int64_t>(perm.begin(), perm.end()));
    const auto permuted = enc.view({1, 3, 4}).index_select(2, idx).view({1, 3, 2, 2});
    const auto r = block->forward_with_weights(dec, permuted);
    const auto expected = ref.weights.index_select(3, idx);
    EXPECT_LT((r.weights - expected).abs().max().item<double>(), 1e-12);
    EXPECT_LT((r.output - ref.output).abs().max().item<double>(), 1e-12);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(count, 24);
}

TEST(AttentionSkip, ResolutionChecks) {
  auto block = make_block(4, 4, 4, 1, 7);
  SkipConfig cfg;
  cfg.resolutions = {8};
  auto dec = torch::randn({1, 4, 8, 8}, torch::kFloat64);
  EXPECT_NO_THROW(attention_skip(block, dec, torch::randn({1, 4, 8, 8}, torch::kFloat64), cfg));
  EXPECT_THROW(attention_skip(block, dec, torch::randn({1, 4, 4, 4}, torch::kFloat64), cfg),
               std::invalid_argument);
  auto small = torch::randn({1, 4, 4, 4}, torch::kFloat64);
  EXPECT_THROW(attention_skip(block, small, small, cfg), std::invalid_argument);
}

TEST(ResidualSkip, ZeroProjectionIsIdentity) {
  ResidualSkip skip(4, 6);
  {
    torch::NoGradGuard g;
    skip->projection->weight.zero_();
  }
  auto dec = torch::randn({1, 4, 4, 4});
  EXPECT_TRUE(torch::equal(skip->forward(dec, torch::randn({1, 6, 4, 4})), dec));
}
