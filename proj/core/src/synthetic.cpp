#include <algorithm>
#include <cmath>
#include <string>

#include "hsissl/error.hpp"
#include "hsissl/rng.hpp"
#include "hsissl/scene.hpp"

namespace hsissl {
namespace {

constexpr std::size_t kMaxLayoutAttempts = 100;
constexpr std::size_t kPeaksPerSignature = 3;

std::vector<float> random_signature(std::size_t bands, Rng& rng) {
  const double c = static_cast<double>(bands);
  std::vector<float> s(bands, 0.0f);
  for (std::size_t k = 0; k < kPeaksPerSignature; ++k) {
    const double amplitude = uniform_real(rng, 0.3, 1.0);
    const double centre = uniform_real(rng, 0.0, c - 1.0);
    const double width = std::max(1.0, uniform_real(rng, c / 16.0, c / 4.0));
    for (std::size_t b = 0; b < bands; ++b) {
      const double d = (static_cast<double>(b) - centre) / width;
      s[b] += static_cast<float>(amplitude * std::exp(-0.5 * d * d));
    }
  }
  return s;
}

// Separable Gaussian blur with mirrored borders.
std::vector<double> smooth(const std::vector<double>& field, std::size_t h,
                           std::size_t w, double sigma) {
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double norm = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-0.5 * double(i * i) / (sigma * sigma));
    norm += taps[i + radius];
  }
  for (auto& t : taps) t /= norm;

  std::vector<double> tmp(h * w, 0.0), out(h * w, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
        acc += taps[i + radius] *
               field[r * w + reflect_index(static_cast<std::ptrdiff_t>(c) + i, w)];
      }
      tmp[r * w + c] = acc;
    }
  }
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
        acc += taps[i + radius] *
               tmp[reflect_index(static_cast<std::ptrdiff_t>(r) + i, h) * w + c];
      }
      out[r * w + c] = acc;
    }
  }
  return out;
}

}  // namespace

SyntheticScene generate_synthetic_scene(const SyntheticSceneOptions& options) {
  if (options.num_classes < 2) throw ConfigError("synthetic scene needs at least 2 classes");
  if (options.num_classes > 65535) throw ConfigError("too many classes for uint16 labels");
  if (options.bands < 4) throw ConfigError("synthetic scene needs at least 4 bands");
  if (options.height == 0 || options.width == 0) {
    throw ConfigError("synthetic scene extents must be positive");
  }
  if (!(options.noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(options.blob_scale > 0.0)) throw ConfigError("blob_scale must be > 0");

  const std::size_t h = options.height, w = options.width, g = options.num_classes;
  const std::size_t n = h * w;

  SyntheticScene out;
  Rng signature_rng(derive_seed(options.seed, "synthetic/signatures"));
  for (std::size_t k = 0; k < g; ++k) {
    out.signatures.push_back(random_signature(options.bands, signature_rng));
  }

  Rng layout_rng(derive_seed(options.seed, "synthetic/layout"));
  const auto min_pixels = static_cast<std::size_t>(std::ceil(0.01 * double(n)));
  std::vector<std::uint16_t> labels(n);
  bool ok = false;
  for (std::size_t attempt = 1; attempt <= kMaxLayoutAttempts && !ok; ++attempt) {
    out.layout_attempts = attempt;
    std::vector<std::vector<double>> fields(g);
    for (auto& f : fields) {
      std::vector<double> noise(n);
      for (auto& v : noise) v = standard_normal(layout_rng);
      f = smooth(noise, h, w, options.blob_scale);
    }
    std::vector<std::size_t> counts(g, 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < g; ++k) {
        if (fields[k][i] > fields[best][i]) best = k;
      }
      labels[i] = static_cast<std::uint16_t>(best + 1);
      ++counts[best];
    }
    ok = std::all_of(counts.begin(), counts.end(),
                     [&](std::size_t c) { return c >= min_pixels; });
  }
  if (!ok) {
    throw GenerationError("could not lay out " + std::to_string(g) +
                          " classes with >= 1% coverage each in " +
                          std::to_string(kMaxLayoutAttempts) + " attempts");
  }

  Rng noise_rng(derive_seed(options.seed, "synthetic/noise"));
  Scene& scene = out.scene;
  scene.height = h;
  scene.width = w;
  scene.bands = options.bands;
  scene.values.resize(n * options.bands);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& sig = out.signatures[labels[i] - 1];
    for (std::size_t b = 0; b < options.bands; ++b) {
      const double noise =
          options.noise_sigma > 0.0 ? options.noise_sigma * standard_normal(noise_rng) : 0.0;
      scene.values[i * options.bands + b] = static_cast<float>(sig[b] + noise);
    }
  }
  scene.wavelengths.resize(options.bands);
  for (std::size_t b = 0; b < options.bands; ++b) {
    scene.wavelengths[b] = 0.4 + 0.6 * double(b) / double(options.bands - 1);
  }
  out.labels = LabelMap{h, w, std::move(labels)};
  return out;
}

}  // namespace hsissl
