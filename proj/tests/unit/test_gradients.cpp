// Reverse-mode gradients against central finite differences (h = 1e-5) in
// double precision, five random instances per operation.

#include <gtest/gtest.h>

#include "hsissl/barlow_twins.hpp"
#include "hsissl/ops.hpp"
#include "oracles.hpp"

using namespace hsissl;
using namespace hsissl::testing;

namespace {

constexpr int kInstances = 5;
constexpr double kTolerance = 1e-4;

void expect_gradients(const std::function<TensorD()>& loss, std::vector<TensorD> inputs) {
  const auto r = gradient_check(loss, std::move(inputs));
  EXPECT_LT(r.relative_error, kTolerance);
  EXPECT_GT(r.analytic_norm, 0.0);
}

}  // namespace

TEST(Gradients, Matmul) {
  Rng rng(11);
  for (int t = 0; t < kInstances; ++t) {
    const std::size_t m = 1 + uniform_index(rng, 4), k = 1 + uniform_index(rng, 4),
                      n = 1 + uniform_index(rng, 4);
    auto a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
    const auto w = random_tensor({m, n}, rng, -1, 1, false);
    expect_gradients([&] { return weighted_sum(matmul(a, b), w); }, {a, b});
  }
}

TEST(Gradients, AddBiasAndAdd) {
  Rng rng(12);
  for (int t = 0; t < kInstances; ++t) {
    auto x = random_tensor({3, 4}, rng), y = random_tensor({3, 4}, rng);
    auto bias = random_tensor({4}, rng);
    const auto w = random_tensor({3, 4}, rng, -1, 1, false);
    expect_gradients([&] { return weighted_sum(add(add_bias(x, bias), y), w); }, {x, y, bias});
  }
}

TEST(Gradients, Conv2d) {
  Rng rng(13);
  for (int t = 0; t < kInstances; ++t) {
    const std::size_t stride = 1 + uniform_index(rng, 2), pad = uniform_index(rng, 2);
    const std::size_t size = stride == 2 ? 5 : 4 + uniform_index(rng, 2);
    auto x = random_tensor({2, 2, size, size}, rng);
    auto k = random_tensor({3, 2, 3, 3}, rng);
    const auto probe = conv2d(x, k, {stride, pad});
    const auto w = random_tensor(probe.shape(), rng, -1, 1, false);
    expect_gradients([&] { return weighted_sum(conv2d(x, k, {stride, pad}), w); }, {x, k});
  }
}

TEST(Gradients, Conv1d) {
  Rng rng(14);
  for (int t = 0; t < kInstances; ++t) {
    const std::size_t pad = uniform_index(rng, 2);
    auto x = random_tensor({2, 2, 7}, rng);
    auto k = random_tensor({3, 2, 3}, rng);
    const auto probe = conv1d(x, k, {1, pad});
    const auto w = random_tensor(probe.shape(), rng, -1, 1, false);
    expect_gradients([&] { return weighted_sum(conv1d(x, k, {1, pad}), w); }, {x, k});
  }
}

TEST(Gradients, BatchNormTraining) {
  Rng rng(15);
  for (int t = 0; t < kInstances; ++t) {
    auto x = random_tensor({4, 3, 2, 2}, rng);
    auto gamma = random_tensor({3}, rng, 0.5, 1.5), beta = random_tensor({3}, rng);
    const auto w = random_tensor({4, 3, 2, 2}, rng, -1, 1, false);
    expect_gradients(
        [&] { return weighted_sum(batch_norm(x, gamma, beta, nullptr, {true, 0.1, 1e-5}), w); },
        {x, gamma, beta});
  }
}

TEST(Gradients, BatchNormTrainingRank2) {
  Rng rng(16);
  for (int t = 0; t < kInstances; ++t) {
    auto x = random_tensor({5, 4}, rng);
    auto gamma = random_tensor({4}, rng, 0.5, 1.5), beta = random_tensor({4}, rng);
    const auto w = random_tensor({5, 4}, rng, -1, 1, false);
    expect_gradients(
        [&] { return weighted_sum(batch_norm(x, gamma, beta, nullptr, {true, 0.1, 1e-5}), w); },
        {x, gamma, beta});
  }
}

TEST(Gradients, BatchNormEvaluation) {
  Rng rng(17);
  for (int t = 0; t < kInstances; ++t) {
    auto x = random_tensor({3, 2, 3}, rng);
    auto gamma = random_tensor({2}, rng, 0.5, 1.5), beta = random_tensor({2}, rng);
    RunningStats<double> stats{{uniform_real(rng, -1, 1), uniform_real(rng, -1, 1)},
                               {uniform_real(rng, 0.5, 2), uniform_real(rng, 0.5, 2)}};
    const auto w = random_tensor({3, 2, 3}, rng, -1, 1, false);
    expect_gradients(
        [&] { return weighted_sum(batch_norm(x, gamma, beta, &stats, {false, 0.1, 1e-5}), w); },
        {x, gamma, beta});
  }
}

TEST(Gradients, ReluPath) {
  Rng rng(18);
  for (int t = 0; t < kInstances; ++t) {
    auto x = random_away_from_zero({3, 4}, rng);
    auto m = random_tensor({4, 4}, rng);
    const auto w = random_tensor({3, 4}, rng, -1, 1, false);
    expect_gradients([&] { return weighted_sum(relu(x), w); }, {x});
    expect_gradients([&] { return weighted_sum(matmul(relu(x), m), w); }, {x, m});
  }
}

TEST(Gradients, GlobalAveragePoolAndReshape) {
  Rng rng(19);
  for (int t = 0; t < kInstances; ++t) {
    auto x = random_tensor({2, 3, 2, 2}, rng);
    const auto w = random_tensor({2, 3}, rng, -1, 1, false);
    expect_gradients([&] { return weighted_sum(flatten(global_average_pool(x)), w); }, {x});
  }
}

TEST(Gradients, SoftmaxCrossEntropy) {
  Rng rng(20);
  for (int t = 0; t < kInstances; ++t) {
    const std::size_t b = 2 + uniform_index(rng, 3), g = 2 + uniform_index(rng, 4);
    auto logits = random_tensor({b, g}, rng, -3, 3);
    std::vector<int> labels(b);
    for (auto& l : labels) l = int(uniform_index(rng, g));
    expect_gradients([&] { return softmax_cross_entropy(logits, std::span<const int>(labels)); },
                     {logits});
  }
}

TEST(Gradients, CrossCorrelationCentered) {
  Rng rng(21);
  for (int t = 0; t < kInstances; ++t) {
    const std::size_t n = 3 + uniform_index(rng, 4), d = 2 + uniform_index(rng, 3);
    auto a = random_tensor({n, d}, rng), b = random_tensor({n, d}, rng);
    const auto w = random_tensor({d, d}, rng, -1, 1, false);
    expect_gradients([&] { return weighted_sum(cross_correlation(a, b, {true, 1e-12}), w); },
                     {a, b});
  }
}

TEST(Gradients, CrossCorrelationUncentered) {
  Rng rng(22);
  for (int t = 0; t < kInstances; ++t) {
    auto a = random_tensor({4, 3}, rng), b = random_tensor({4, 3}, rng);
    const auto w = random_tensor({3, 3}, rng, -1, 1, false);
    expect_gradients([&] { return weighted_sum(cross_correlation(a, b, {false, 1e-12}), w); },
                     {a, b});
  }
}

TEST(Gradients, BarlowTwinsLoss) {
  Rng rng(23);
  for (int t = 0; t < kInstances; ++t) {
    const std::size_t d = 2 + uniform_index(rng, 4);
    auto c = random_tensor({d, d}, rng);
    const double lambda = uniform_real(rng, 0.001, 0.5);
    expect_gradients([&] { return barlow_twins_loss(c, lambda); }, {c});
  }
}

TEST(Gradients, BarlowTwinsThroughCorrelation) {
  Rng rng(24);
  for (int t = 0; t < kInstances; ++t) {
    auto a = random_tensor({6, 3}, rng), b = random_tensor({6, 3}, rng);
    expect_gradients([&] { return barlow_twins_loss(cross_correlation(a, b), 0.005); }, {a, b});
  }
}
