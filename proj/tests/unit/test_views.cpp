#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "hsissl/error.hpp"
#include "hsissl/scene.hpp"
#include "hsissl/views.hpp"
#include "oracles.hpp"

using namespace hsissl;
using hsissl::testing::enumerated_overlap;

namespace {

Tensor random_patch(std::size_t p, std::size_t c, Rng& rng) {
  std::vector<float> v(p * p * c);
  for (auto& x : v) x = float(uniform_real(rng, -1, 1));
  return Tensor({p, p, c}, std::move(v));
}

Scene random_scene(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Scene s{h, w, c, std::vector<float>(h * w * c), {}};
  for (auto& v : s.values) v = float(uniform_real(rng, -1, 1));
  return s;
}

std::vector<float> spectrum_at(const Tensor& patch, std::size_t i, std::size_t j) {
  const std::size_t p = patch.dim(0), c = patch.dim(2);
  const auto d = patch.data();
  return {d.begin() + long((i * p + j) * c), d.begin() + long((i * p + j + 1) * c)};
}

bool same_values(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST(SpatialTransforms, RotationIsCounterClockwiseAndHasOrderFour) {
  Rng rng(1);
  const auto x = random_patch(3, 2, rng);
  const auto r = rotate_patch(x, 1);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(spectrum_at(r, i, j), spectrum_at(x, j, 2 - i));
  EXPECT_TRUE(same_values(rotate_patch(rotate_patch(r, 2), 1), x));
  EXPECT_TRUE(same_values(rotate_patch(x, 2), rotate_patch(r, 1)));
}

TEST(SpatialTransforms, FlipMirrorsOneAxisAndIsAnInvolution) {
  Rng rng(2);
  const auto x = random_patch(5, 3, rng);
  const auto h = flip_patch(x, FlipAxis::horizontal);
  const auto v = flip_patch(x, FlipAxis::vertical);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_EQ(spectrum_at(h, i, j), spectrum_at(x, i, 4 - j));
      EXPECT_EQ(spectrum_at(v, i, j), spectrum_at(x, 4 - i, j));
    }
  EXPECT_TRUE(same_values(flip_patch(h, FlipAxis::horizontal), x));
}

TEST(SpatialTransforms, FullCropIsIdentityWithinInterpolationTolerance) {
  Rng rng(3);
  const auto x = random_patch(9, 4, rng);
  const auto y = resized_crop(x, {0.0, 0.0, 9.0, 9.0});
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y.data()[i], x.data()[i], 1e-6);
}

TEST(SpatialTransforms, CropOfConstantPatchStaysConstant) {
  const Tensor x = Tensor::full({7, 7, 2}, 0.5f);
  const auto y = resized_crop(x, {1.3, 0.7, 3.9, 4.4});
  for (float v : y.data()) EXPECT_NEAR(v, 0.5f, 1e-6);
}

TEST(Transforms, EveryKindPreservesShape) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t p = 1 + 2 * uniform_index(rng, 5), c = 2 + uniform_index(rng, 30);
    const auto x = random_patch(p, c, rng);
    for (auto kind : all_transform_kinds()) {
      Transform t;
      t.kind = kind;
      if (is_spatial(kind)) {
        if (p == 1) {
          EXPECT_THROW(apply_spatial(x, t, rng), ConfigError);
          continue;
        }
        EXPECT_EQ(apply_spatial(x, t, rng).shape(), x.shape());
        EXPECT_THROW(apply_spectral(x, t, rng), ConfigError);
      } else {
        EXPECT_EQ(apply_spectral(x, t, rng).shape(), x.shape());
        EXPECT_THROW(apply_spatial(x, t, rng), ConfigError);
      }
    }
  }
}

TEST(Transforms, FlipAndRotationPreserveTheSetOfSpectra) {
  Rng rng(5);
  const auto x = random_patch(5, 3, rng);
  std::multiset<std::vector<float>> before;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) before.insert(spectrum_at(x, i, j));
  for (auto kind : {TransformKind::flip, TransformKind::rotation}) {
    for (int k = 0; k < 10; ++k) {
      const auto y = apply_spatial(x, Transform{kind, {}, 1.0}, rng);
      std::multiset<std::vector<float>> after;
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) after.insert(spectrum_at(y, i, j));
      EXPECT_EQ(before, after);
    }
  }
}

TEST(Transforms, BandSwapPairsAreDisjointAdjacentAndInvolutive) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + uniform_index(rng, 40);
    const std::size_t count = 1 + uniform_index(rng, c / 2);
    const auto pairs = sample_swap_pairs(c, count, rng);
    ASSERT_EQ(pairs.size(), count);
    std::set<std::size_t> touched;
    for (auto lo : pairs) {
      ASSERT_LT(lo + 1, c);
      EXPECT_TRUE(touched.insert(lo).second);
      EXPECT_TRUE(touched.insert(lo + 1).second);
    }
    const auto x = random_patch(1, c, rng);
    EXPECT_TRUE(same_values(swap_adjacent_bands(swap_adjacent_bands(x, pairs), pairs), x));
  }
}

TEST(Transforms, PixelRemovalIsNoOpOnSinglePixel) {
  Rng rng(7);
  const auto x = random_patch(1, 8, rng);
  Transform t{TransformKind::pixel_removal, {{"max_fraction", 1.0}}, 1.0};
  for (int k = 0; k < 20; ++k) EXPECT_TRUE(same_values(apply_spectral(x, t, rng), x));
}

TEST(Transforms, BandDropZeroesWholeBands) {
  Rng rng(8);
  const auto x = random_patch(3, 20, rng);
  Transform t{TransformKind::band_drop, {{"max_fraction", 0.5}}, 1.0};
  for (int k = 0; k < 20; ++k) {
    const auto y = apply_spectral(x, t, rng);
    for (std::size_t b = 0; b < 20; ++b) {
      bool dropped = y.data()[b] == 0.0f && x.data()[b] != 0.0f;
      for (std::size_t px = 0; px < 9; ++px) {
        const float v = y.data()[px * 20 + b];
        EXPECT_EQ(v, dropped ? 0.0f : x.data()[px * 20 + b]);
      }
    }
  }
}

TEST(Augmentation, ProbabilityZeroNeverFiresProbabilityOneAlwaysDoes) {
  Rng rng(9);
  const auto x = random_patch(5, 6, rng);
  const AugmentationSpec never({Transform{TransformKind::gaussian_noise, {}, 0.0}});
  const AugmentationSpec always({Transform{TransformKind::gaussian_noise, {}, 1.0}});
  for (int k = 0; k < 50; ++k) {
    EXPECT_TRUE(same_values(apply_augmentations(x, never, rng), x));
    EXPECT_FALSE(same_values(apply_augmentations(x, always, rng), x));
  }
}

TEST(Augmentation, FiringRateMatchesProbability) {
  Rng rng(10);
  const auto x = random_patch(1, 4, rng);
  const AugmentationSpec spec({Transform{TransformKind::scaling, {}, 0.75}});
  int fired = 0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) fired += !same_values(apply_augmentations(x, spec, rng), x);
  EXPECT_NEAR(double(fired) / n, 0.75, 0.015);
}

TEST(Augmentation, SpecValidationAndJsonRoundTrip) {
  EXPECT_THROW(AugmentationSpec({Transform{TransformKind::flip, {}, 1.5}}), ConfigError);
  EXPECT_THROW(AugmentationSpec({Transform{TransformKind::scaling, {{"bogus", 1.0}}, 0.5}}),
               ConfigError);
  EXPECT_THROW(parse_transform_kind("shear"), ConfigError);

  const AugmentationSpec spec({Transform{TransformKind::rotation, {}, 0.75},
                               Transform{TransformKind::gaussian_noise, {{"sigma", 0.3}}, 0.5}});
  const auto back = AugmentationSpec::from_json(spec.to_json());
  ASSERT_EQ(back.transforms().size(), 2u);
  EXPECT_EQ(back.transforms()[0].kind, TransformKind::rotation);
  EXPECT_EQ(back.transforms()[1].param("sigma", 0.0), 0.3);
  EXPECT_EQ(back.transforms()[1].probability, 0.5);
  EXPECT_TRUE(back.has_spatial());

  const auto bare = AugmentationSpec::from_json(R"(["flip", "band_swap"])");
  EXPECT_EQ(bare.transforms()[1].kind, TransformKind::band_swap);
  EXPECT_EQ(bare.transforms()[1].probability, 0.75);
}

TEST(PairGeometry, OverlapFormulaMatchesPixelCounting) {
  for (std::size_t p : {1u, 3u, 5u, 9u}) {
    for (long dr = -long(p); dr <= long(p); ++dr)
      for (long dc = -long(p); dc <= long(p); ++dc)
        EXPECT_DOUBLE_EQ(overlap_fraction(p, {dr, dc}), enumerated_overlap(p, dr, dc));
  }
}

TEST(PairGeometry, AdmissibleOffsetsMatchEnumeration) {
  for (std::size_t p : {1u, 3u, 9u}) {
    for (double f : {0.25, 0.5, 0.7, 1.0}) {
      std::vector<Offset> expected;
      for (long dr = -long(p); dr <= long(p); ++dr)
        for (long dc = -long(p); dc <= long(p); ++dc)
          if (enumerated_overlap(p, dr, dc) >= f - 1e-12) expected.push_back({dr, dc});
      auto got = admissible_offsets(p, f);
      auto key = [](const Offset& o) { return std::pair(o.rows, o.cols); };
      std::sort(got.begin(), got.end(), [&](auto& a, auto& b) { return key(a) < key(b); });
      std::sort(expected.begin(), expected.end(), [&](auto& a, auto& b) { return key(a) < key(b); });
      EXPECT_EQ(got, expected) << "p=" << p << " f=" << f;
    }
  }
}

TEST(PairGeometry, NeighborOffsetsAtCornersMatchEnumeration) {
  for (auto [r, c] : std::vector<std::pair<std::size_t, std::size_t>>{
           {0, 0}, {0, 9}, {7, 0}, {7, 9}, {3, 4}, {1, 1}}) {
    std::set<std::pair<long, long>> expected;
    for (long dr = -2; dr <= 2; ++dr)
      for (long dc = -2; dc <= 2; ++dc) {
        const long rr = long(r) + dr, cc = long(c) + dc;
        if ((dr || dc) && rr >= 0 && rr < 8 && cc >= 0 && cc < 10) expected.insert({dr, dc});
      }
    std::set<std::pair<long, long>> got;
    for (const auto& o : neighbor_offsets(8, 10, r, c, 5)) got.insert({o.rows, o.cols});
    EXPECT_EQ(got, expected);
  }
}

TEST(PairSampling, OverlappingPairsRespectMinimumOverlap) {
  const auto scene = random_scene(16, 16, 3, 1);
  Rng rng(11);
  std::set<std::pair<long, long>> seen;
  for (int k = 0; k < 10000; ++k) {
    const auto row = uniform_index(rng, 16), col = uniform_index(rng, 16);
    const auto pair = sample_overlapping_patch_pair(scene, row, col, 9, 0.5, rng);
    const auto o = pair.offset;
    ASSERT_GE(enumerated_overlap(9, o.rows, o.cols), 0.5);
    ASSERT_GE(long(row) + o.rows, 0);
    ASSERT_LT(long(row) + o.rows, 16);
    ASSERT_GE(long(col) + o.cols, 0);
    ASSERT_LT(long(col) + o.cols, 16);
    if (k < 50) {
      EXPECT_TRUE(same_values(pair.first, extract_patch(scene, row, col, 9)));
      EXPECT_TRUE(same_values(pair.second, extract_patch(scene, row + o.rows, col + o.cols, 9)));
    }
    if (row > 4 && row < 11 && col > 4 && col < 11) seen.insert({o.rows, o.cols});
  }
  EXPECT_EQ(seen.size(), admissible_offsets(9, 0.5).size());
}

TEST(PairSampling, NeighborPairsStayInChebyshevWindow) {
  const auto scene = random_scene(12, 9, 4, 2);
  Rng rng(12);
  for (int k = 0; k < 10000; ++k) {
    const auto row = uniform_index(rng, 12), col = uniform_index(rng, 9);
    const auto pair = sample_neighbor_pixel_pair(scene, row, col, 5, rng);
    const auto o = pair.offset;
    ASSERT_LE(std::max(std::labs(o.rows), std::labs(o.cols)), 2);
    ASSERT_FALSE(o.rows == 0 && o.cols == 0);
    const long r2 = long(row) + o.rows, c2 = long(col) + o.cols;
    ASSERT_TRUE(r2 >= 0 && r2 < 12 && c2 >= 0 && c2 < 9);
    ASSERT_EQ(pair.second.shape(), (Shape{1, 1, 4}));
    for (std::size_t b = 0; b < 4; ++b) ASSERT_EQ(pair.second.data()[b], scene.at(r2, c2, b));
  }
  const auto tiny = random_scene(1, 1, 2, 3);
  EXPECT_THROW(sample_neighbor_pixel_pair(tiny, 0, 0, 3, rng), ConfigError);
}

TEST(MakeViews, TrivialPoliciesGiveIdenticalViews) {
  const auto scene = random_scene(10, 10, 5, 4);
  Rng rng(13);
  const AugmentationSpec none;
  PairSamplingPolicy same{PairMode::same_input, 0.5, 5};
  PairSamplingPolicy full_overlap{PairMode::overlapping_patches, 1.0, 5};
  for (int k = 0; k < 20; ++k) {
    const auto row = uniform_index(rng, 10), col = uniform_index(rng, 10);
    auto v = make_views(scene, row, col, 5, same, none, none, rng);
    EXPECT_TRUE(same_values(v.view_a, v.view_b));
    v = make_views(scene, row, col, 5, full_overlap, none, none, rng);
    EXPECT_TRUE(same_values(v.view_a, v.view_b));
  }
}

TEST(MakeViews, DeterministicForSeedAndRejectsSpatialOnPixels) {
  const auto scene = random_scene(10, 10, 5, 5);
  const auto spec = AugmentationSpec::from_json(R"(["flip", "rotation", "gaussian_noise"])");
  Rng a(42), b(42);
  PairSamplingPolicy policy;
  const auto va = make_views(scene, 3, 4, 5, policy, spec, spec, a);
  const auto vb = make_views(scene, 3, 4, 5, policy, spec, spec, b);
  EXPECT_TRUE(same_values(va.view_a, vb.view_a));
  EXPECT_TRUE(same_values(va.view_b, vb.view_b));
  EXPECT_THROW(make_views(scene, 3, 4, 1, policy, spec, spec, a), ConfigError);
}

TEST(MakeViews, NeighborModeWithPatchesCentresOnBothPixels) {
  const auto scene = random_scene(10, 10, 3, 6);
  Rng rng(14);
  const AugmentationSpec none;
  PairSamplingPolicy policy{PairMode::neighbor_pixels, 0.5, 3};
  for (int k = 0; k < 20; ++k) {
    const auto v = make_views(scene, 5, 5, 3, policy, none, none, rng);
    const auto o = v.partner_offset;
    EXPECT_TRUE(same_values(v.view_a, extract_patch(scene, 5, 5, 3)));
    EXPECT_TRUE(same_values(v.view_b, extract_patch(scene, 5 + o.rows, 5 + o.cols, 3)));
  }
}
