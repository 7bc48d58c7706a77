#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "hsissl/error.hpp"
#include "hsissl/models.hpp"
#include "hsissl/scene.hpp"
#include "oracles.hpp"

using namespace hsissl;
namespace fs = std::filesystem;

namespace {

Tensor random_batch(const EncoderConfig& ec, std::size_t b, Rng& rng) {
  const std::size_t p = ec.input_patch_size();
  const Shape shape = ec.kind == EncoderKind::conv2d ? Shape{b, ec.input_bands, p, p}
                                                     : Shape{b, 1, ec.input_bands};
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = float(uniform_real(rng, -1, 1));
  return Tensor(shape, std::move(v));
}

// Parameter count from the architecture description, layer by layer.
std::size_t expected_encoder_parameters(const EncoderConfig& ec) {
  const std::size_t k = ec.kind == EncoderKind::conv2d ? ec.kernel_size * ec.kernel_size
                                                       : ec.kernel_size;
  const std::size_t in = ec.kind == EncoderKind::conv2d ? ec.input_bands : 1;
  const std::size_t w0 = ec.widths[0], w1 = ec.widths[1];
  std::size_t n = w0 * in * k + 2 * w0;                      // stem + BN
  n += 2 * (w0 * w0 * k + 2 * w0);                           // block 1
  n += w1 * w0 * k + 2 * w1 + w1 * w1 * k + 2 * w1;          // block 2
  if (w0 != w1) n += w1 * w0 + 2 * w1;                       // projection shortcut
  if (w1 != ec.embedding_dim) n += w1 * ec.embedding_dim + ec.embedding_dim;
  return n;
}

std::vector<float> flat_parameters(EncoderModel& model) {
  std::vector<float> out;
  for (auto& p : model.parameters()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  for (auto& b : model.buffers()) out.insert(out.end(), b.values->begin(), b.values->end());
  return out;
}

}  // namespace

TEST(Encoder, OutputShapesAcrossKindsBandsAndPatchSizes) {
  Rng rng(1);
  for (auto kind : {EncoderKind::conv1d, EncoderKind::conv2d}) {
    for (std::size_t bands : {4u, 103u, 144u}) {
      for (std::size_t p : {1u, 9u}) {
        EncoderConfig ec;
        ec.kind = kind;
        ec.input_bands = bands;
        ec.patch_size = p;
        ec.widths = {4, 8};
        ec.embedding_dim = 6;
        ProjectionHeadConfig pc{{5}, 7};
        EncoderModel model(ec, pc, 3);
        const auto batch = random_batch(ec, 3, rng);
        const auto h = model.forward_encoder(batch, true);
        EXPECT_EQ(h.shape(), (Shape{3, 6}));
        EXPECT_EQ(model.forward_projector(h, true).shape(), (Shape{3, 7}));
        model.attach_linear_head(5);
        EXPECT_EQ(model.forward_classifier(batch, false).shape(), (Shape{3, 5}));
      }
    }
  }
}

TEST(Encoder, ParameterCountsMatchArchitecture) {
  struct Case {
    EncoderKind kind;
    std::size_t bands, w0, w1, emb;
    std::size_t pinned;
  };
  // Pinned values for the default widths; the formula covers the rest.
  const std::vector<Case> cases{
      {EncoderKind::conv2d, 103, 64, 128, 128, 0},
      {EncoderKind::conv2d, 144, 64, 128, 128, 0},
      {EncoderKind::conv1d, 103, 64, 128, 128, 0},
      {EncoderKind::conv2d, 32, 16, 16, 32, 0},
  };
  for (const auto& c : cases) {
    EncoderConfig ec;
    ec.kind = c.kind;
    ec.input_bands = c.bands;
    ec.widths = {c.w0, c.w1};
    ec.embedding_dim = c.emb;
    EncoderModel model(ec, {}, 0);
    EXPECT_EQ(model.encoder_parameter_count(), expected_encoder_parameters(ec));
  }
  EncoderConfig ec;
  ec.input_bands = 103;
  EncoderModel model(ec, {}, 0);
  // 59328 + 128 + 2 * (36864 + 128) + 73728 + 256 + 147456 + 256 + 8192 + 256
  EXPECT_EQ(model.encoder_parameter_count(), 363584u);
}

TEST(Encoder, ConfigValidation) {
  EncoderConfig ec;
  ec.input_bands = 10;
  ec.widths = {8};
  EXPECT_THROW(EncoderModel(ec, {}, 0), ConfigError);
  ec.widths = {8, 8};
  ec.patch_size = 4;
  EXPECT_THROW(EncoderModel(ec, {}, 0), ConfigError);
  ec.patch_size = 3;
  ec.kernel_size = 5;
  EXPECT_THROW(EncoderModel(ec, {}, 0), ConfigError);
  ec.kind = EncoderKind::conv1d;
  ec.input_bands = 4;
  EXPECT_THROW(EncoderModel(ec, {}, 0), ConfigError);
  ec.input_bands = 5;
  EXPECT_NO_THROW(EncoderModel(ec, {}, 0));
  EXPECT_THROW(EncoderModel(EncoderConfig{}, {}, 0), ConfigError);  // no bands
}

TEST(Encoder, LayoutMismatchIsDimensionError) {
  EncoderConfig ec;
  ec.input_bands = 6;
  ec.patch_size = 5;
  ec.widths = {4, 4};
  ec.embedding_dim = 4;
  EncoderModel model(ec, {{4}, 4}, 0);
  EXPECT_THROW(model.forward_encoder(Tensor::zeros({2, 5, 5, 5}), true), DimensionError);
  EXPECT_THROW(model.forward_encoder(Tensor::zeros({2, 6, 3, 3}), true), DimensionError);
}

TEST(Encoder, InitializationIsSeedDeterministic) {
  EncoderConfig ec;
  ec.input_bands = 8;
  ec.widths = {4, 8};
  ec.embedding_dim = 8;
  EncoderModel a(ec, {{8}, 8}, 5), b(ec, {{8}, 8}, 5), c(ec, {{8}, 8}, 6);
  EXPECT_EQ(flat_parameters(a), flat_parameters(b));
  EXPECT_NE(flat_parameters(a), flat_parameters(c));
}

TEST(Encoder, GradientReachesEncoderThroughProjector) {
  Rng rng(2);
  EncoderConfig ec;
  ec.input_bands = 5;
  ec.patch_size = 5;
  ec.widths = {4, 6};
  ec.embedding_dim = 6;
  EncoderModel model(ec, {{8}, 8}, 1);
  const auto z = model.forward_projector(model.forward_encoder(random_batch(ec, 4, rng), true), true);
  std::vector<float> w(z.numel());
  for (auto& x : w) x = float(uniform_real(rng, -1, 1));
  backward(matmul(reshape(z, {1, z.numel()}), Tensor({z.numel(), 1}, w)));
  for (auto& p : model.encoder_parameters()) {
    ASSERT_TRUE(p.tensor.has_grad()) << p.name;
    double norm = 0;
    for (float g : p.tensor.grad()) norm += double(g) * g;
    EXPECT_GT(norm, 0.0) << p.name;
  }
}

TEST(Encoder, HeadIsZeroInitializedAndNeedsTwoClasses) {
  EncoderConfig ec;
  ec.input_bands = 5;
  ec.widths = {4, 4};
  ec.embedding_dim = 4;
  EncoderModel model(ec, {{4}, 4}, 0);
  EXPECT_THROW(model.attach_linear_head(1), ConfigError);
  model.attach_linear_head(3);
  for (auto& p : model.head_parameters())
    for (float v : p.tensor.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Encoder, FrozenEncoderRecordsNoGradientsAndKeepsStatistics) {
  Rng rng(3);
  EncoderConfig ec;
  ec.input_bands = 5;
  ec.patch_size = 3;
  ec.widths = {4, 4};
  ec.embedding_dim = 4;
  EncoderModel model(ec, {{4}, 4}, 0);
  model.attach_linear_head(3);
  model.set_frozen(true);
  const auto before = flat_parameters(model);
  const auto batch = random_batch(ec, 4, rng);
  const auto first = model.forward_encoder(batch, true);
  const std::vector<int> labels{0, 1, 2, 0};
  backward(softmax_cross_entropy(model.forward_classifier(batch, true), std::span<const int>(labels)));
  for (auto& p : model.encoder_parameters()) EXPECT_FALSE(p.tensor.has_grad()) << p.name;
  for (auto& p : model.head_parameters()) EXPECT_TRUE(p.tensor.has_grad()) << p.name;
  // Only the head gradient changed; parameters and running stats did not.
  auto after = flat_parameters(model);
  EXPECT_EQ(before, after);
  const auto second = model.forward_encoder(batch, true);
  EXPECT_TRUE(std::equal(first.data().begin(), first.data().end(), second.data().begin()));

  model.set_frozen(false);
  model.forward_encoder(batch, true);
  EXPECT_NE(flat_parameters(model), before);  // running statistics move again
}

TEST(Encoder, CloneIsDeepAndEqual) {
  EncoderConfig ec;
  ec.input_bands = 4;
  ec.widths = {4, 4};
  ec.embedding_dim = 4;
  EncoderModel model(ec, {{4}, 4}, 9);
  model.attach_linear_head(2);
  auto copy = model.clone();
  EXPECT_EQ(flat_parameters(copy), flat_parameters(model));
  copy.parameters()[0].tensor.mutable_data()[0] += 1.0f;
  EXPECT_NE(flat_parameters(copy), flat_parameters(model));
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(4);
  EncoderConfig ec;
  ec.input_bands = 7;
  ec.patch_size = 5;
  ec.widths = {4, 6};
  ec.embedding_dim = 5;
  EncoderModel model(ec, {{6, 6}, 3}, 2);
  model.forward_encoder(random_batch(ec, 4, rng), true);  // non-trivial running stats
  model.attach_linear_head(4);
  model.head_parameters()[0].tensor.mutable_data()[3] = 0.25f;
  const auto path = fs::temp_directory_path() / "hsissl_test_checkpoint.ckpt";
  save_checkpoint(model, path, {{"note", "hello"}});
  auto loaded = load_checkpoint(path);
  EXPECT_EQ(flat_parameters(loaded.model), flat_parameters(model));
  EXPECT_EQ(loaded.metadata.at("note"), "hello");
  EXPECT_EQ(loaded.model.num_classes(), 4u);
  EXPECT_EQ(loaded.model.encoder_config().embedding_dim, 5u);

  const auto batch = random_batch(ec, 3, rng);
  const auto a = model.forward_classifier(batch, false);
  const auto b = loaded.model.forward_classifier(batch, false);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Checkpoint, CorruptFilesAreFormatErrors) {
  EncoderConfig ec;
  ec.input_bands = 4;
  ec.widths = {4, 4};
  ec.embedding_dim = 4;
  EncoderModel model(ec, {{4}, 4}, 0);
  const auto path = fs::temp_directory_path() / "hsissl_test_corrupt.ckpt";
  save_checkpoint(model, path);
  const auto size = fs::file_size(path);
  fs::resize_file(path, size - 4);
  EXPECT_THROW(load_checkpoint(path), FormatError);
  save_checkpoint(model, path);
  std::ofstream(path, std::ios::app) << "x";
  EXPECT_THROW(load_checkpoint(path), FormatError);
  std::ofstream(path) << "not a checkpoint\n";
  EXPECT_THROW(load_checkpoint(path), FormatError);
}

TEST(InputBatch, Conv1dReadsCentrePixel) {
  Rng rng(5);
  Scene scene{5, 5, 6, std::vector<float>(150), {}};
  for (auto& v : scene.values) v = float(uniform_real(rng, -1, 1));
  EncoderConfig ec;
  ec.kind = EncoderKind::conv1d;
  ec.input_bands = 6;
  const std::vector<Tensor> patches{extract_patch(scene, 2, 2, 3), extract_patch(scene, 1, 3, 3)};
  const auto batch = make_input_batch(patches, ec);
  ASSERT_EQ(batch.shape(), (Shape{2, 1, 6}));
  for (std::size_t b = 0; b < 6; ++b) {
    EXPECT_EQ(batch.data()[b], scene.at(2, 2, b));
    EXPECT_EQ(batch.data()[6 + b], scene.at(1, 3, b));
  }
  ec.kind = EncoderKind::conv2d;
  ec.patch_size = 3;
  const auto b2 = make_input_batch(patches, ec);
  ASSERT_EQ(b2.shape(), (Shape{2, 6, 3, 3}));
  // [B x C x p x p] from [p x p x C]
  EXPECT_EQ(b2.data()[(0 * 6 + 4) * 9 + 1 * 3 + 2], patches[0].data()[(1 * 3 + 2) * 6 + 4]);
}
