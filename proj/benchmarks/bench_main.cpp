#include <benchmark/benchmark.h>

#include <vector>

#include "hsissl/barlow_twins.hpp"
#include "hsissl/models.hpp"
#include "hsissl/ops.hpp"
#include "hsissl/rng.hpp"
#include "hsissl/scene.hpp"

using namespace hsissl;

namespace {

Tensor random_tensor(const Shape& shape, std::uint64_t seed, bool requires_grad = false) {
  Rng rng(seed);
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = float(uniform_real(rng, -1.0, 1.0));
  return Tensor(shape, std::move(v), requires_grad);
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = std::size_t(state.range(0));
  const auto a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * std::int64_t(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

// Batch x channels x 9 x 9 patches with a 3x3 kernel, as in the first encoder block.
static void BM_Conv2dForward(benchmark::State& state) {
  const auto batch = std::size_t(state.range(0)), cin = std::size_t(state.range(1));
  const auto x = random_tensor({batch, cin, 9, 9}, 1);
  const auto k = random_tensor({64, cin, 3, 3}, 2);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, {1, 1}));
}
BENCHMARK(BM_Conv2dForward)->Args({64, 103})->Args({256, 64});

static void BM_Conv2dBackward(benchmark::State& state) {
  const auto batch = std::size_t(state.range(0)), cin = std::size_t(state.range(1));
  auto x = random_tensor({batch, cin, 9, 9}, 1, true);
  auto k = random_tensor({64, cin, 3, 3}, 2, true);
  for (auto _ : state) {
    x.zero_grad();
    k.zero_grad();
    backward(sum(conv2d(x, k, {1, 1})));
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({64, 103})->Args({256, 64});

static void BM_CrossCorrelation(benchmark::State& state) {
  const auto n = std::size_t(state.range(0)), d = std::size_t(state.range(1));
  const auto a = random_tensor({n, d}, 1), b = random_tensor({n, d}, 2);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(cross_correlation(a, b));
}
BENCHMARK(BM_CrossCorrelation)->Args({256, 256})->Args({256, 2048});

// One Barlow-Twins forward and backward pass on a batch of view pairs.
static void BM_PretrainStep(benchmark::State& state) {
  const auto batch = std::size_t(state.range(0));
  EncoderConfig ec;
  ec.input_bands = 32;
  ec.widths = {16, 32};
  ec.embedding_dim = 32;
  EncoderModel model(ec, {{256}, 256}, 1);
  std::vector<Tensor> patches;
  for (std::size_t i = 0; i < batch; ++i) patches.push_back(random_tensor({9, 9, 32}, i));
  const auto input = make_input_batch(patches, ec);
  for (auto _ : state) {
    for (auto& p : model.parameters()) p.tensor.zero_grad();
    const auto za = model.forward_projector(model.forward_encoder(input, true), true);
    const auto zb = model.forward_projector(model.forward_encoder(input, true), true);
    backward(barlow_twins_loss(cross_correlation(za, zb), 0.005));
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(batch));
}
BENCHMARK(BM_PretrainStep)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
