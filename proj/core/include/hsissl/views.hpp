#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsissl/rng.hpp"
#include "hsissl/scene.hpp"
#include "hsissl/tensor.hpp"

namespace hsissl {

enum class TransformKind {
  flip,
  rotation,
  resized_crop,
  scaling,
  gaussian_noise,
  band_drop,
  pixel_removal,
  band_swap,
  translation,
};

std::string_view transform_name(TransformKind kind);
/// Throws ConfigError for unknown names.
TransformKind parse_transform_kind(std::string_view name);
/// Spatial transforms need a patch larger than one pixel.
bool is_spatial(TransformKind kind);
/// All transforms in catalogue order.
std::span<const TransformKind> all_transform_kinds();

/// One entry of an augmentation pipeline. Parameters not listed in `params`
/// fall back to the defaults:
///   resized_crop   min_area=0.5 min_aspect=0.75 max_aspect=4/3
///   scaling        min=0.9 max=1.1
///   gaussian_noise sigma=0.1
///   band_drop      max_fraction=0.1
///   pixel_removal  max_fraction=0.1
///   band_swap      max_fraction=0.05 (up to ceil(max_fraction * C) pairs)
///   translation    sigma=0.1
struct Transform {
  TransformKind kind = TransformKind::flip;
  std::map<std::string, double> params;
  double probability = 0.75;

  double param(const std::string& key, double fallback) const;
};

/// Ordered, immutable list of transforms applied one after another, each
/// with its own probability.
class AugmentationSpec {
 public:
  AugmentationSpec() = default;
  /// Throws ConfigError for probabilities outside [0, 1] or unknown params.
  explicit AugmentationSpec(std::vector<Transform> transforms);

  static AugmentationSpec from_names(std::span<const std::string> names,
                                     double probability = 0.75);

  const std::vector<Transform>& transforms() const { return transforms_; }
  bool empty() const { return transforms_.empty(); }
  bool has_spatial() const;

  /// JSON array of {"name", "params", "probability"} objects in order.
  std::string to_json() const;
  static AugmentationSpec from_json(std::string_view text);

 private:
  std::vector<Transform> transforms_;
};

// Deterministic building blocks. Patches are [p x p x C] tensors.

enum class FlipAxis { horizontal, vertical };

Tensor flip_patch(const Tensor& patch, FlipAxis axis);
/// Rotates the spatial axes counter-clockwise by quarter_turns * 90 degrees.
Tensor rotate_patch(const Tensor& patch, int quarter_turns);

struct CropBox {
  double top = 0.0;
  double left = 0.0;
  double height = 0.0;
  double width = 0.0;
};
/// Samples the box back onto a p x p grid with bilinear interpolation.
Tensor resized_crop(const Tensor& patch, const CropBox& box);

/// Swaps band i with band i+1 for every i in `lower_bands`.
Tensor swap_adjacent_bands(const Tensor& x, std::span<const std::size_t> lower_bands);
/// `count` disjoint adjacent pairs (at most bands / 2), drawn uniformly over
/// all such sets, as their ascending lower band indices.
std::vector<std::size_t> sample_swap_pairs(std::size_t bands, std::size_t count, Rng& rng);
Tensor zero_bands(const Tensor& x, std::span<const std::size_t> bands);
/// Zeroes whole spectra at flat spatial positions (row * p + col).
Tensor zero_pixels(const Tensor& x, std::span<const std::size_t> positions);

// Stochastic transforms; the caller decides whether to apply (probability).

/// Throws ConfigError when called on a 1x1 input or a spectral kind.
Tensor apply_spatial(const Tensor& patch, const Transform& transform, Rng& rng);
/// Throws ConfigError for a spatial kind.
Tensor apply_spectral(const Tensor& x, const Transform& transform, Rng& rng);
/// Runs the pipeline: each transform fires independently with its probability.
Tensor apply_augmentations(const Tensor& x, const AugmentationSpec& spec, Rng& rng);

enum class PairMode { same_input, overlapping_patches, neighbor_pixels };

std::string_view pair_mode_name(PairMode mode);
PairMode parse_pair_mode(std::string_view name);

struct PairSamplingPolicy {
  PairMode mode = PairMode::overlapping_patches;
  double min_overlap_fraction = 0.5;
  std::size_t neighborhood_size = 5;

  /// Throws ConfigError if min_overlap_fraction is outside (0, 1] or the
  /// neighbourhood is even or smaller than 3.
  void validate() const;
};

struct Offset {
  std::ptrdiff_t rows = 0;
  std::ptrdiff_t cols = 0;

  friend bool operator==(const Offset&, const Offset&) = default;
};

/// Intersection area of two p x p windows shifted by `offset`, over p^2.
double overlap_fraction(std::size_t patch_size, Offset offset);
/// Every offset whose windows overlap by at least `min_fraction`.
std::vector<Offset> admissible_offsets(std::size_t patch_size, double min_fraction);
/// In-bounds pixels of the w x w window around (row, col), centre excluded.
std::vector<Offset> neighbor_offsets(std::size_t height, std::size_t width,
                                     std::size_t row, std::size_t col,
                                     std::size_t neighborhood_size);

struct PatchPair {
  Tensor first;
  Tensor second;
  Offset offset;  // second centre minus first centre
};

/// Second centre drawn uniformly from admissible offsets that stay inside
/// the scene; the zero offset always qualifies.
PatchPair sample_overlapping_patch_pair(const Scene& scene, std::size_t row,
                                        std::size_t col, std::size_t patch_size,
                                        double min_overlap_fraction, Rng& rng);

/// Spectra ([1 x 1 x C]) of (row, col) and of a uniformly drawn neighbour.
/// Throws ConfigError on a 1x1 scene, which has no neighbours.
PatchPair sample_neighbor_pixel_pair(const Scene& scene, std::size_t row,
                                     std::size_t col, std::size_t neighborhood_size,
                                     Rng& rng);

struct ViewPair {
  Tensor view_a;
  Tensor view_b;
  std::size_t row = 0;
  std::size_t col = 0;
  Offset partner_offset;
};

/// Samples the pair per `policy`, then augments the first element with
/// `spec_a` and the second with `spec_b`. In neighbor_pixels mode with
/// patch_size > 1 the two patches are centred on the neighbouring pixels.
ViewPair make_views(const Scene& scene, std::size_t row, std::size_t col,
                    std::size_t patch_size, const PairSamplingPolicy& policy,
                    const AugmentationSpec& spec_a, const AugmentationSpec& spec_b,
                    Rng& rng);

}  // namespace hsissl
