#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hsissl/tensor.hpp"

namespace hsissl {

/// Hyperspectral raster held pixel-interleaved in memory:
/// values[(row * width + col) * bands + band].
struct Scene {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t bands = 0;
  std::vector<float> values;
  std::vector<double> wavelengths;  // micrometres; empty or one per band

  float at(std::size_t row, std::size_t col, std::size_t band) const {
    return values[(row * width + col) * bands + band];
  }
  std::span<const float> pixel(std::size_t row, std::size_t col) const {
    return {values.data() + (row * width + col) * bands, bands};
  }
  std::size_t pixel_count() const { return height * width; }

  /// Throws FormatError when extents, values or wavelengths are invalid.
  void validate() const;
};

/// Per-pixel class ids: 0 is unlabeled, 1..G are classes.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint16_t> labels;

  std::uint16_t at(std::size_t row, std::size_t col) const {
    return labels[row * width + col];
  }
  /// Largest class id present (G).
  std::size_t num_classes() const;
  void validate() const;
};

struct LoadedScene {
  Scene scene;
  std::optional<LabelMap> labels;
};

// On-disk format: a key=value text header (`<name>.hdr`) next to a raw
// little-endian payload (`<name>.raw`). Scenes are float32 band-sequential;
// label maps are uint16 row-major.

std::filesystem::path payload_path_for(const std::filesystem::path& header);

Scene load_scene(const std::filesystem::path& header);
LabelMap load_label_map(const std::filesystem::path& header);
/// Loads a scene and, when given, its label map; throws ConsistencyError if
/// their extents differ.
LoadedScene load_scene(const std::filesystem::path& header,
                       const std::optional<std::filesystem::path>& labels_header);

void save_scene(const Scene& scene, const std::filesystem::path& header);
void save_label_map(const LabelMap& labels, const std::filesystem::path& header);

struct NormalizedScene {
  Scene scene;
  std::vector<std::size_t> constant_bands;  // zeroed because variance was 0

  bool has_warning() const { return !constant_bands.empty(); }
};

/// Standardizes each band to zero mean and unit (population) variance over
/// all pixels. Constant bands become zeros and are reported, not rejected.
NormalizedScene normalize_per_band(const Scene& scene);

/// Mirror (reflect-101) index into [0, n): -1 -> 1, n -> n-2.
std::size_t reflect_index(std::ptrdiff_t index, std::size_t n);

/// p x p x C window centred on (row, col). Positions outside the scene read
/// the mirror-reflected pixel. Throws ConfigError for even p and
/// DimensionError for an out-of-bounds centre.
Tensor extract_patch(const Scene& scene, std::size_t row, std::size_t col,
                     std::size_t patch_size);

struct LabeledPixel {
  std::size_t row = 0;
  std::size_t col = 0;
  int label = 0;  // zero-based class index (label map id - 1)

  friend bool operator==(const LabeledPixel&, const LabeledPixel&) = default;
};

struct FewShotSplit {
  std::size_t shots = 0;
  std::uint64_t seed = 0;
  std::size_t num_classes = 0;
  std::vector<LabeledPixel> train;
  std::vector<LabeledPixel> test;
};

/// Draws exactly `shots` training pixels per class uniformly without
/// replacement; every other labeled pixel becomes a test pixel.
/// Throws SplitError naming the first class with fewer than `shots` pixels.
FewShotSplit sample_few_shot(const LabelMap& labels, std::size_t shots,
                             std::uint64_t seed);

struct SyntheticSceneOptions {
  std::size_t num_classes = 6;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t bands = 32;
  double noise_sigma = 0.5;
  double blob_scale = 6.0;
  std::uint64_t seed = 0;
};

struct SyntheticScene {
  Scene scene;
  LabelMap labels;
  std::vector<std::vector<float>> signatures;  // one spectrum per class
  std::size_t layout_attempts = 0;
};

/// Scene with smooth random class spectra laid out as contiguous blobs
/// (argmax of Gaussian-smoothed noise fields) plus i.i.d. Gaussian noise.
/// Every class covers at least 1% of the pixels.
SyntheticScene generate_synthetic_scene(const SyntheticSceneOptions& options);

}  // namespace hsissl
