#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hsissl/barlow_twins.hpp"
#include "hsissl/error.hpp"
#include "hsissl/lars.hpp"
#include "oracles.hpp"

using namespace hsissl;
using namespace hsissl::testing;

namespace {

TensorD square(std::size_t d, const std::function<double(std::size_t, std::size_t)>& f) {
  std::vector<double> v(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) v[i * d + j] = f(i, j);
  return TensorD({d, d}, std::move(v));
}

std::vector<double> values(const TensorD& t) { return {t.data().begin(), t.data().end()}; }

SyntheticScene tiny_scene(std::uint64_t seed = 3) {
  SyntheticSceneOptions o;
  o.num_classes = 3;
  o.height = 12;
  o.width = 12;
  o.bands = 6;
  o.blob_scale = 3.0;
  o.seed = seed;
  return generate_synthetic_scene(o);
}

EncoderModel tiny_model(std::size_t bands, std::uint64_t seed = 1) {
  EncoderConfig ec;
  ec.input_bands = bands;
  ec.patch_size = 3;
  ec.widths = {4, 4};
  ec.embedding_dim = 4;
  return EncoderModel(ec, {{8}, 8}, seed);
}

BarlowTwinsConfig tiny_config() {
  BarlowTwinsConfig c;
  c.batch_size = 32;
  c.epochs = 2;
  c.warmup_epochs = 0.5;
  return c;
}

std::vector<float> flat(EncoderModel& m) {
  std::vector<float> out;
  for (auto& p : m.parameters()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  for (auto& b : m.buffers()) out.insert(out.end(), b.values->begin(), b.values->end());
  return out;
}

}  // namespace

TEST(BarlowTwinsLoss, ReferenceValues) {
  EXPECT_NEAR(barlow_twins_loss(square(4, [](auto i, auto j) { return i == j ? 1.0 : 0.0; }), 0.005).item(),
              0.0, 1e-12);
  EXPECT_NEAR(barlow_twins_loss(square(4, [](auto, auto) { return 0.0; }), 0.005).item(), 4.0, 1e-12);
  EXPECT_NEAR(barlow_twins_loss(square(4, [](auto, auto) { return 1.0; }), 0.005).item(), 0.06, 1e-12);
}

TEST(BarlowTwinsLoss, MatchesDefinitionAndIsPositiveAwayFromIdentity) {
  Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 1 + uniform_index(rng, 6);
    const double lambda = uniform_real(rng, 1e-3, 1.0);
    const auto c = random_tensor({d, d}, rng, -1, 1, false);
    const double loss = barlow_twins_loss(c, lambda).item();
    EXPECT_NEAR(loss, naive_barlow_twins(values(c), d, lambda), 1e-12);
    EXPECT_GT(loss, 0.0);
  }
}

TEST(BarlowTwinsLoss, RejectsNonSquareInput) {
  EXPECT_THROW(barlow_twins_loss(TensorD::zeros({2, 3}), 0.005), DimensionError);
}

TEST(CrossCorrelation, MatchesNaiveOracle) {
  Rng rng(32);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + uniform_index(rng, 30), d = 1 + uniform_index(rng, 8);
    const bool center = t % 2 == 0;
    const auto a = random_tensor({n, d}, rng, -2, 2, false);
    const auto b = random_tensor({n, d}, rng, -2, 2, false);
    const auto c = cross_correlation(a, b, {center, 1e-12});
    const auto expected = naive_cross_correlation(values(a), values(b), n, d, center);
    ASSERT_EQ(c.shape(), (Shape{d, d}));
    for (std::size_t k = 0; k < d * d; ++k) EXPECT_NEAR(c.data()[k], expected[k], 1e-10);
  }
}

TEST(CrossCorrelation, EntriesBoundedAndBranchSwapTransposes) {
  Rng rng(33);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + uniform_index(rng, 40), d = 1 + uniform_index(rng, 10);
    const auto a = random_tensor({n, d}, rng, -5, 5, false);
    const auto b = random_tensor({n, d}, rng, -5, 5, false);
    const auto ab = cross_correlation(a, b);
    const auto ba = cross_correlation(b, a);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double v = ab.data()[i * d + j];
        EXPECT_LE(std::abs(v), 1.0 + 1e-12);
        EXPECT_EQ(v, ba.data()[j * d + i]);
      }
  }
}

TEST(CrossCorrelation, IdenticalBranchesHaveUnitDiagonal) {
  Rng rng(34);
  const auto a = random_tensor({16, 5}, rng, -1, 1, false);
  const auto c = cross_correlation(a, a);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(c.data()[i * 5 + i], 1.0, 1e-10);
  EXPECT_NEAR(barlow_twins_loss(c, 0.0 + 1e-9).item(), 0.0, 1e-6);
}

TEST(CrossCorrelation, DegenerateBatchAndShapeErrors) {
  EXPECT_THROW(cross_correlation(TensorD::zeros({1, 3}), TensorD::zeros({1, 3})),
               DegenerateBatchError);
  EXPECT_THROW(cross_correlation(TensorD::zeros({4, 3}), TensorD::zeros({4, 2})), DimensionError);
  EXPECT_THROW(cross_correlation(TensorD::zeros({4, 3}), TensorD::zeros({5, 3})), DimensionError);
}

TEST(CrossCorrelation, MeanAbsOffDiagonal) {
  const Tensor c({2, 2}, {1.0f, -0.5f, 0.25f, 1.0f});
  EXPECT_DOUBLE_EQ(mean_abs_off_diagonal(c), 0.375);
}

TEST(Lars, LearningRateSchedule) {
  LarsOptions o;
  o.base_lr = 0.2;
  o.warmup_epochs = 2;
  o.total_epochs = 10;
  EXPECT_DOUBLE_EQ(lars_learning_rate(o, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(lars_learning_rate(o, 1.0), 0.1);
  EXPECT_DOUBLE_EQ(lars_learning_rate(o, 2.0), 0.2);
  EXPECT_NEAR(lars_learning_rate(o, 6.0), 0.1, 1e-15);
  EXPECT_NEAR(lars_learning_rate(o, 10.0), 0.0, 1e-15);
  double previous = lars_learning_rate(o, 2.0);
  for (double e = 2.25; e <= 10.0; e += 0.25) {
    const double lr = lars_learning_rate(o, e);
    EXPECT_LE(lr, previous);
    previous = lr;
  }
  o.warmup_epochs = 0;
  EXPECT_DOUBLE_EQ(lars_learning_rate(o, 0.0), 0.2);
}

TEST(Lars, LocalLearningRate) {
  EXPECT_DOUBLE_EQ(lars_local_lr(2.0, 1.0, 0.0, 0.001, 0.0), 0.002);
  EXPECT_NEAR(lars_local_lr(2.0, 1.0, 0.5, 0.001, 1e-8), 0.001 * 2.0 / (2.0 + 1e-8), 1e-18);
  EXPECT_DOUBLE_EQ(lars_local_lr(0.0, 1.0, 0.0, 0.001, 1e-8), 1.0);
  EXPECT_DOUBLE_EQ(lars_local_lr(1.0, 0.0, 0.0, 0.001, 1e-8), 1.0);
}

TEST(Lars, StepMatchesHandComputedUpdate) {
  Tensor w({2}, {3.0f, 4.0f}, true);  // |w| = 5
  Tensor bias({1}, {1.0f}, true);
  w.mutable_grad()[0] = 0.6f;  // |g| = 1
  w.mutable_grad()[1] = 0.8f;
  bias.mutable_grad()[0] = 2.0f;
  LarsOptions o;
  o.base_lr = 0.5;
  o.weight_decay = 0.1;
  o.momentum = 0.9;
  o.trust_coefficient = 0.01;
  o.eps = 0.0;
  o.warmup_epochs = 0;
  o.total_epochs = 1e9;
  Lars lars({{"w", w, false}, {"b", bias, true}}, o);
  lars.step(0.0);
  const double local = 0.01 * 5.0 / (1.0 + 0.1 * 5.0);
  EXPECT_NEAR(w.data()[0], 3.0 - 0.5 * local * (0.6 + 0.1 * 3.0), 1e-6);
  EXPECT_NEAR(w.data()[1], 4.0 - 0.5 * local * (0.8 + 0.1 * 4.0), 1e-6);
  EXPECT_NEAR(bias.data()[0], 1.0 - 0.5 * 2.0, 1e-6);  // no decay, no trust ratio

  // Second step with the same gradients adds momentum.
  const double v1 = 2.0;
  lars.step(0.0);
  EXPECT_NEAR(bias.data()[0], 0.0 - 0.5 * (0.9 * v1 + 2.0), 1e-6);
}

TEST(Lars, NonFiniteGradientNamesParameter) {
  Tensor w({2}, {1.0f, 1.0f}, true);
  w.mutable_grad()[1] = std::numeric_limits<float>::quiet_NaN();
  Lars lars({{"encoder.stem.weight", w, false}}, LarsOptions{});
  try {
    lars.step(0.0);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder.stem.weight"), std::string::npos);
  }
}

TEST(Lars, ZeroGradClearsStoredGradients) {
  Tensor w({2}, {1.0f, 1.0f}, true);
  w.mutable_grad()[0] = 3.0f;
  Lars lars({{"w", w, false}}, LarsOptions{});
  lars.zero_grad();
  EXPECT_FALSE(w.has_grad());
}

TEST(BarlowTwinsConfig, Validation) {
  EXPECT_NO_THROW(BarlowTwinsConfig{}.validate());
  auto c = BarlowTwinsConfig{};
  c.lambda = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch_size = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.divergence_factor = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Pretrain, IsDeterministicForASeed) {
  const auto synth = tiny_scene();
  const auto spec = AugmentationSpec::from_json(R"(["flip", "rotation", "gaussian_noise"])");
  std::vector<std::vector<float>> params;
  std::vector<std::vector<double>> losses;
  for (int run = 0; run < 2; ++run) {
    auto model = tiny_model(6);
    const auto r = pretrain(synth.scene, model, {}, spec, spec, tiny_config(), 42);
    losses.push_back(r.epoch_losses);
    params.push_back(flat(model));
    EXPECT_EQ(r.batches_per_epoch, 144u / 32u);
  }
  EXPECT_EQ(losses[0], losses[1]);
  EXPECT_EQ(params[0], params[1]);

  auto other = tiny_model(6);
  const auto r = pretrain(synth.scene, other, {}, spec, spec, tiny_config(), 43);
  EXPECT_NE(r.epoch_losses, losses[0]);
}

TEST(Pretrain, ChangesEncoderAndReportsEveryEpoch) {
  const auto synth = tiny_scene();
  auto model = tiny_model(6);
  const auto before = flat(model);
  std::vector<std::size_t> seen;
  const auto r = pretrain(synth.scene, model, {PairMode::same_input}, {}, {}, tiny_config(), 1,
                          [&](std::size_t epoch, double loss) {
                            seen.push_back(epoch);
                            EXPECT_TRUE(std::isfinite(loss));
                          });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2}));  // numbered from 1
  EXPECT_EQ(r.epoch_losses.size(), 2u);
  EXPECT_NE(flat(model), before);
}

TEST(Pretrain, ZeroEpochsLeavesModelUntouched) {
  const auto synth = tiny_scene();
  auto model = tiny_model(6);
  const auto before = flat(model);
  auto config = tiny_config();
  config.epochs = 0;
  const auto r = pretrain(synth.scene, model, {}, {}, {}, config, 0);
  EXPECT_TRUE(r.epoch_losses.empty());
  EXPECT_EQ(flat(model), before);
}

TEST(Pretrain, RejectsMismatchedOrFrozenModels) {
  const auto synth = tiny_scene();
  auto wrong = tiny_model(5);
  EXPECT_THROW(pretrain(synth.scene, wrong, {}, {}, {}, tiny_config(), 0), ConfigError);
  auto frozen = tiny_model(6);
  frozen.set_frozen(true);
  EXPECT_THROW(pretrain(synth.scene, frozen, {}, {}, {}, tiny_config(), 0), ConfigError);
  auto model = tiny_model(6);
  auto big = tiny_config();
  big.batch_size = 145;
  EXPECT_THROW(pretrain(synth.scene, model, {}, {}, {}, big, 0), ConfigError);
  const auto spatial = AugmentationSpec::from_json(R"(["flip"])");
  auto conv1d_config = EncoderConfig{};
  conv1d_config.kind = EncoderKind::conv1d;
  conv1d_config.input_bands = 6;
  conv1d_config.widths = {4, 4};
  conv1d_config.embedding_dim = 4;
  EncoderModel spectral(conv1d_config, {{8}, 8}, 0);
  EXPECT_THROW(pretrain(synth.scene, spectral, {}, spatial, {}, tiny_config(), 0), ConfigError);
}

TEST(Pretrain, RunawayLossIsReportedAsDivergence) {
  const auto synth = tiny_scene();
  auto model = tiny_model(6);
  auto config = tiny_config();
  config.epochs = 6;
  config.base_lr = 1e4;
  config.lars_trust_coefficient = 1.0;
  config.warmup_epochs = 0;
  EXPECT_THROW(pretrain(synth.scene, model, {}, {}, {}, config, 0), NumericalError);
}

TEST(Pretrain, ProbeLeavesModelUntouched) {
  const auto synth = tiny_scene();
  auto model = tiny_model(6);
  const auto before = flat(model);
  Rng rng(5);
  std::vector<std::size_t> idx(16);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i * 9;
  const auto views = make_view_batch(synth.scene, idx, 3, {}, {}, {}, rng);
  ASSERT_EQ(views.size(), 16u);
  EXPECT_EQ(views[3].row, 27u / 12u);
  EXPECT_EQ(views[3].col, 27u % 12u);
  const auto c = probe_cross_correlation(model, views);
  EXPECT_EQ(c.shape(), (Shape{8, 8}));
  EXPECT_EQ(flat(model), before);
}

TEST(Pretrain, LossHistoryCsv) {
  const std::vector<double> losses{1.5, 0.25};
  EXPECT_EQ(loss_history_csv(losses), "epoch,mean_loss\n1,1.5\n2,0.25\n");
}
