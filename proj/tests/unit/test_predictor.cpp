#include <gtest/gtest.h>

#include "support.hpp"
#include "vidpred/checkpoint.hpp"
#include "vidpred/data.hpp"
#include "vidpred/errors.hpp"
#include "vidpred/predictor.hpp"
#include "vidpred/training.hpp"

using namespace vidpred;

namespace {

PredictorConfig small_config(SkipKind kind = SkipKind::Attention) {
  PredictorConfig c;
  c.input_frames = 3;
  c.channels = 3;
  c.height = 16;
  c.width = 16;
  c.widths = {8, 16};
  c.latent_dim = 8;
  c.skip.kind = kind;
  c.skip.resolutions = {8};
  c.skip.qk_dim = 8;
  return c;
}

Predictor make_model(const PredictorConfig& c, int64_t seed = 0) {
  torch::manual_seed(seed);
  Predictor m(c);
  m->eval();
  return m;
}

}  // namespace

TEST(PredictorConfig, Validation) {
  auto c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.skip.resolutions = {6};
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.skip.qk_dim = 6;
  c.skip.heads = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.height = 18;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.input_frames = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(PredictorConfig{}.level_heights(), (std::vector<int64_t>{64, 32, 16, 8}));
}

TEST(Predictor, EncoderSeesConcatenatedFrames) {
  PredictorConfig c;  // n = 6, C = 3, 64x64
  c.widths = {8, 8, 8};
  c.latent_dim = 4;
  c.skip.qk_dim = 8;
  Predictor m(c);
  const auto params = m->named_parameters();
  EXPECT_EQ(params["stem.weight"].size(1), 18);
}

TEST(Predictor, ShapeContractAndInvariants) {
  for (auto kind : {SkipKind::None, SkipKind::Residual, SkipKind::Attention}) {
    auto c = small_config(kind);
    c.channels = kind == SkipKind::Residual ? 1 : 3;
    auto m = make_model(c);
    auto frames = torch::rand({3, c.channels, 16, 16});
    const auto p = m->predict_next(frames);
    EXPECT_EQ(p.image.mean.sizes(), (std::vector<int64_t>{c.channels, 16, 16}));
    EXPECT_EQ(p.image.log_variance.sizes(), p.image.mean.sizes());
    EXPECT_NO_THROW(p.image.validate());
    const auto batched = m->predict_next(torch::rand({2, 3, c.channels, 16, 16}));
    EXPECT_EQ(batched.image.mean.sizes(), (std::vector<int64_t>{2, c.channels, 16, 16}));
  }
}

TEST(Predictor, OutputsStayBoundedForExtremeInputs) {
  auto m = make_model(small_config(), 3);
  {
    torch::NoGradGuard g;
    for (auto& p : m->parameters()) p.mul_(40.0);
  }
  const auto p = m->predict_next(torch::rand({3, 3, 16, 16}));
  EXPECT_NO_THROW(p.image.validate());
  EXPECT_TRUE(torch::isfinite(p.image.log_variance).all().item<bool>());
}

TEST(Predictor, WrongInputIsRejected) {
  auto m = make_model(small_config());
  EXPECT_THROW(m->predict_next(torch::rand({2, 3, 16, 16})), std::invalid_argument);
  EXPECT_THROW(m->predict_next(torch::rand({3, 3, 16, 8})), std::invalid_argument);
  EXPECT_THROW(m->predict_next(torch::rand({3, 1, 16, 16})), std::invalid_argument);
}

TEST(Predictor, DeterministicModeIsIdempotent) {
  auto m = make_model(small_config());
  auto frames = torch::rand({3, 3, 16, 16});
  const auto a = m->predict_next(frames);
  const auto b = m->predict_next(frames);
  EXPECT_TRUE(torch::equal(a.latent.sample, a.latent.mean));
  EXPECT_TRUE(torch::equal(a.latent.mean, b.latent.mean));
  EXPECT_TRUE(torch::equal(a.image.mean, b.image.mean));
  EXPECT_TRUE(torch::equal(a.image.log_variance, b.image.log_variance));
}

TEST(Predictor, SeededSamplingReproducesEpsilon) {
  auto c = small_config();
  c.deterministic_latent = false;
  auto m = make_model(c);
  auto frames = torch::rand({3, 3, 16, 16});
  m->set_generator(at::make_generator<at::CPUGeneratorImpl>(99));
  const auto a = m->encode(frames).latent;
  m->set_generator(at::make_generator<at::CPUGeneratorImpl>(99));
  const auto b = m->encode(frames).latent;
  EXPECT_TRUE(torch::equal(a.sample, b.sample));
  EXPECT_FALSE(torch::equal(a.sample, a.mean));

  auto gen = at::make_generator<at::CPUGeneratorImpl>(99);
  const auto eps = torch::randn({1, c.latent_dim}, gen).squeeze(0);
  const auto expected = a.mean + torch::exp(0.5 * a.log_variance) * eps;
  EXPECT_LT((a.sample - expected).abs().max().item<float>(), 1e-6f);
}

TEST(Predictor, TrainingModeSamples) {
  auto m = make_model(small_config());
  m->train();
  const auto l = m->encode(torch::rand({3, 3, 16, 16})).latent;
  EXPECT_FALSE(torch::equal(l.sample, l.mean));
}

TEST(Predictor, NoneEqualsResidualWithZeroProjection) {
  auto none = make_model(small_config(SkipKind::None), 4);
  auto residual = make_model(small_config(SkipKind::Residual), 5);
  copy_matching_parameters(*residual, *none);
  {
    torch::NoGradGuard g;
    for (auto& [r, skip] : residual->residual_skips()) {
      skip->projection->weight.zero_();
    }
  }
  auto frames = torch::rand({3, 3, 16, 16});
  const auto a = none->predict_next(frames).image;
  const auto b = residual->predict_next(frames).image;
  EXPECT_TRUE(torch::equal(a.mean, b.mean));
  EXPECT_TRUE(torch::equal(a.log_variance, b.log_variance));
}

TEST(Predictor, DecodeRejectsIncompletePyramid) {
  auto m = make_model(small_config());
  auto enc = m->encode(torch::rand({3, 3, 16, 16}));
  enc.pyramid.levels.erase(8);
  EXPECT_THROW(m->decode(enc.latent, enc.pyramid), std::invalid_argument);
  auto bad = enc.latent;
  bad.sample = torch::zeros({5});
  EXPECT_THROW(m->decode(bad, m->encode(torch::rand({3, 3, 16, 16})).pyramid),
               std::invalid_argument);
}

TEST(Predictor, GradientReachesEncoderFeaturesThroughAttention) {
  auto m = make_model(small_config(), 6);
  m->to(torch::kFloat64);
  auto enc = m->encode(torch::rand({3, 3, 16, 16}, torch::kFloat64));
  auto skip_map = enc.pyramid.levels.at(8).detach().clone().requires_grad_();
  auto pyramid = enc.pyramid;
  pyramid.levels[8] = skip_map;
  auto latent = enc.latent;
  latent.sample = latent.sample.detach();
  const auto weights = torch::rand({3, 16, 16}, torch::kFloat64);
  auto objective = [&](const torch::Tensor& s) {
    auto p = pyramid;
    p.levels[8] = s;
    return (m->decode(latent, p).mean.squeeze(0) * weights).sum();
  };
  const auto grad = torch::autograd::grad({objective(skip_map)}, {skip_map})[0];
  EXPECT_GT(grad.abs().max().item<double>(), 0.0);

  // finite-difference spot check on a few entries
  torch::NoGradGuard g;
  const double h = 1e-5;
  for (auto idx : std::vector<std::array<int64_t, 4>>{{0, 0, 0, 0}, {0, 3, 4, 5}, {0, 15, 7, 2}}) {
    auto up = skip_map.detach().clone();
    auto down = up.clone();
    up[idx[0]][idx[1]][idx[2]][idx[3]] += h;
    down[idx[0]][idx[1]][idx[2]][idx[3]] -= h;
    const double fd = (objective(up).item<double>() - objective(down).item<double>()) / (2 * h);
    const double an = grad[idx[0]][idx[1]][idx[2]][idx[3]].item<double>();
    EXPECT_NEAR(an, fd, 1e-6 + 1e-4 * std::abs(fd));
  }
}

TEST(Rollout, FirstStepEqualsPredictNextAndPrefixProperty) {
  auto m = make_model(small_config(), 7);
  auto seed = torch::rand({3, 3, 16, 16});
  const auto one = m->rollout(seed, 1);
  EXPECT_EQ(one.size(0), 1);
  EXPECT_TRUE(torch::equal(one[0], m->predict_next(seed).image.mean));
  const auto six = m->rollout(seed, 6);
  const auto four = m->rollout(seed, 4);
  EXPECT_TRUE(torch::equal(six.narrow(0, 0, 4), four));
  EXPECT_FALSE(six.requires_grad());
  EXPECT_THROW(m->rollout(seed, 0), std::invalid_argument);
  EXPECT_THROW(m->rollout(seed.narrow(0, 0, 2), 3), std::invalid_argument);
}

TEST(Rollout, FeedsBackTheMean) {
  auto m = make_model(small_config(), 8);
  auto seed = torch::rand({3, 3, 16, 16});
  const auto r = m->rollout(seed, 2);
  const auto manual_input = torch::cat({seed.narrow(0, 1, 2), r[0].unsqueeze(0)}, 0);
  EXPECT_TRUE(torch::equal(r[1], m->predict_next(manual_input).image.mean));
}

TEST(Rollout, FiftyStepsOnUnseenSyntheticData) {
  auto m = make_model(small_config(), 9);
  SyntheticSpec spec;
  spec.num_sequences = 2;
  spec.length = 3;
  spec.size = 16;
  spec.seed = 404;
  const auto ds = make_synthetic_dataset(spec, 3, TransformSpec{16, 16});
  const auto r = m->rollout_gaussian(ds.sequence(1).frames, 50);
  EXPECT_EQ(r.means.size(0), 50);
  for (int64_t i = 0; i < 50; ++i) {
    EXPECT_NO_THROW((GaussianImage{r.means[i], r.log_variances[i]}.validate()));
  }
  EXPECT_NO_THROW(FrameSequence{r.means}.validate());
}

TEST(Predictor, OverfitsStaticSequence) {
  auto c = small_config();
  c.channels = 1;
  torch::manual_seed(10);
  Predictor m(c);
  // static frame: bright square on black
  auto frame = torch::zeros({1, 16, 16});
  frame.narrow(1, 4, 6).narrow(2, 5, 6).fill_(0.9);
  const auto window = frame.unsqueeze(0).expand({4, 1, 16, 16}).unsqueeze(0).contiguous();
  OptimizerConfig oc;
  oc.learning_rate = 3e-3;
  auto opt = make_optimizer(m, oc);
  LossWeights w{0.0, 1.0, 1e-4, 1.0};
  for (int step = 0; step < 250; ++step) {
    training_step(m, *opt, window, 0, w, nullptr);
  }
  m->eval();
  const auto mean = m->predict_next(window[0].narrow(0, 0, 3)).image.mean;
  EXPECT_LT(torch::mse_loss(mean, frame).item<double>(), 1e-3);
}

TEST(Checkpoint, RoundTripRestoresOutputsAndMeta) {
  vidpred::testing::TempDir dir("ckpt");
  auto m = make_model(small_config(), 11);
  Checkpoint meta{small_config(), {4, 10, 77}, "seed: 77\n"};
  const auto path = (dir / "a.ckpt").string();
  save_checkpoint(path, m, meta);
  Checkpoint loaded_meta;
  auto loaded = load_checkpoint(path, &loaded_meta);
  loaded->eval();
  EXPECT_EQ(loaded_meta.config, meta.config);
  EXPECT_EQ(loaded_meta.progress, meta.progress);
  EXPECT_EQ(loaded_meta.run_config, meta.run_config);
  auto frames = torch::rand({3, 3, 16, 16});
  EXPECT_TRUE(torch::equal(m->predict_next(frames).image.mean,
                           loaded->predict_next(frames).image.mean));

  auto other_cfg = small_config();
  other_cfg.latent_dim = 4;
  Predictor other(other_cfg);
  EXPECT_THROW(load_checkpoint_into(path, other), ConfigError);
  EXPECT_THROW(load_checkpoint((dir / "missing.ckpt").string()), IoError);
  EXPECT_EQ(predictor_config_from_json(predictor_config_to_json(other_cfg)), other_cfg);
}
