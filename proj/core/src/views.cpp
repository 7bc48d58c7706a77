#include "hsissl/views.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "hsissl/error.hpp"

namespace hsissl {
namespace {

constexpr std::array kAllKinds = {
    TransformKind::flip,          TransformKind::rotation,
    TransformKind::resized_crop,  TransformKind::scaling,
    TransformKind::gaussian_noise, TransformKind::band_drop,
    TransformKind::pixel_removal, TransformKind::band_swap,
    TransformKind::translation,
};

std::set<std::string> allowed_params(TransformKind kind) {
  switch (kind) {
    case TransformKind::resized_crop:
      return {"min_area", "min_aspect", "max_aspect"};
    case TransformKind::scaling:
      return {"min", "max"};
    case TransformKind::gaussian_noise:
    case TransformKind::translation:
      return {"sigma"};
    case TransformKind::band_drop:
    case TransformKind::pixel_removal:
    case TransformKind::band_swap:
      return {"max_fraction"};
    default:
      return {};
  }
}

struct PatchDims {
  std::size_t p;
  std::size_t bands;
};

PatchDims patch_dims(const Tensor& x) {
  if (x.rank() != 3 || x.dim(0) != x.dim(1)) {
    throw DimensionError("expected a [p x p x C] patch, got " + shape_string(x.shape()));
  }
  return {x.dim(0), x.dim(2)};
}

// Picks `count` distinct indices from [0, n).
std::vector<std::size_t> choose_subset(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace

std::string_view transform_name(TransformKind kind) {
  switch (kind) {
    case TransformKind::flip: return "flip";
    case TransformKind::rotation: return "rotation";
    case TransformKind::resized_crop: return "resized_crop";
    case TransformKind::scaling: return "scaling";
    case TransformKind::gaussian_noise: return "gaussian_noise";
    case TransformKind::band_drop: return "band_drop";
    case TransformKind::pixel_removal: return "pixel_removal";
    case TransformKind::band_swap: return "band_swap";
    case TransformKind::translation: return "translation";
  }
  return "unknown";
}

TransformKind parse_transform_kind(std::string_view name) {
  for (const auto kind : kAllKinds) {
    if (transform_name(kind) == name) return kind;
  }
  throw ConfigError("unknown transform '" + std::string(name) + "'");
}

bool is_spatial(TransformKind kind) {
  return kind == TransformKind::flip || kind == TransformKind::rotation ||
         kind == TransformKind::resized_crop;
}

std::span<const TransformKind> all_transform_kinds() { return kAllKinds; }

double Transform::param(const std::string& key, double fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

AugmentationSpec::AugmentationSpec(std::vector<Transform> transforms)
    : transforms_(std::move(transforms)) {
  for (const auto& t : transforms_) {
    if (!(t.probability >= 0.0 && t.probability <= 1.0)) {
      throw ConfigError("probability of " + std::string(transform_name(t.kind)) +
                        " must lie in [0, 1]");
    }
    const auto allowed = allowed_params(t.kind);
    for (const auto& [key, value] : t.params) {
      if (!allowed.count(key)) {
        throw ConfigError("transform " + std::string(transform_name(t.kind)) +
                          " has no parameter '" + key + "'");
      }
      if (!std::isfinite(value)) {
        throw ConfigError("parameter '" + key + "' must be finite");
      }
    }
  }
}

AugmentationSpec AugmentationSpec::from_names(std::span<const std::string> names,
                                              double probability) {
  std::vector<Transform> transforms;
  for (const auto& name : names) {
    transforms.push_back({parse_transform_kind(name), {}, probability});
  }
  return AugmentationSpec(std::move(transforms));
}

bool AugmentationSpec::has_spatial() const {
  return std::any_of(transforms_.begin(), transforms_.end(),
                     [](const Transform& t) { return is_spatial(t.kind); });
}

std::string AugmentationSpec::to_json() const {
  auto array = nlohmann::json::array();
  for (const auto& t : transforms_) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [key, value] : t.params) params[key] = value;
    array.push_back({{"name", transform_name(t.kind)},
                     {"params", params},
                     {"probability", t.probability}});
  }
  return array.dump(2);
}

AugmentationSpec AugmentationSpec::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("augmentation spec is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ConfigError("augmentation spec must be a JSON array");
  std::vector<Transform> transforms;
  try {
    for (const auto& entry : doc) {
      Transform t;
      if (entry.is_string()) {
        t.kind = parse_transform_kind(entry.get<std::string>());
      } else {
        t.kind = parse_transform_kind(entry.at("name").get<std::string>());
        t.probability = entry.value("probability", 0.75);
        if (entry.contains("params")) {
          for (const auto& [key, value] : entry.at("params").items()) {
            t.params[key] = value.get<double>();
          }
        }
      }
      transforms.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed augmentation entry: ") + e.what());
  }
  return AugmentationSpec(std::move(transforms));
}

Tensor flip_patch(const Tensor& patch, FlipAxis axis) {
  const auto [p, c] = patch_dims(patch);
  const auto src = patch.data();
  std::vector<float> out(src.size());
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const std::size_t si = axis == FlipAxis::vertical ? p - 1 - i : i;
      const std::size_t sj = axis == FlipAxis::horizontal ? p - 1 - j : j;
      std::copy_n(src.begin() + (si * p + sj) * c, c, out.begin() + (i * p + j) * c);
    }
  }
  return Tensor(patch.shape(), std::move(out));
}

Tensor rotate_patch(const Tensor& patch, int quarter_turns) {
  const auto [p, c] = patch_dims(patch);
  const int k = ((quarter_turns % 4) + 4) % 4;
  const auto src = patch.data();
  std::vector<float> out(src.size());
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      std::size_t si = i, sj = j;
      // Output (i, j) reads the source position that lands there after k
      // counter-clockwise quarter turns.
      switch (k) {
        case 1: si = j; sj = p - 1 - i; break;
        case 2: si = p - 1 - i; sj = p - 1 - j; break;
        case 3: si = p - 1 - j; sj = i; break;
        default: break;
      }
      std::copy_n(src.begin() + (si * p + sj) * c, c, out.begin() + (i * p + j) * c);
    }
  }
  return Tensor(patch.shape(), std::move(out));
}

Tensor resized_crop(const Tensor& patch, const CropBox& box) {
  const auto [p, c] = patch_dims(patch);
  const auto src = patch.data();
  const double scale_y = box.height / double(p);
  const double scale_x = box.width / double(p);
  const double hi = double(p - 1);
  std::vector<float> out(src.size());
  for (std::size_t i = 0; i < p; ++i) {
    const double y = std::clamp(box.top + (double(i) + 0.5) * scale_y - 0.5, 0.0, hi);
    const auto y0 = static_cast<std::size_t>(std::floor(y));
    const std::size_t y1 = std::min(y0 + 1, p - 1);
    const double fy = y - double(y0);
    for (std::size_t j = 0; j < p; ++j) {
      const double x = std::clamp(box.left + (double(j) + 0.5) * scale_x - 0.5, 0.0, hi);
      const auto x0 = static_cast<std::size_t>(std::floor(x));
      const std::size_t x1 = std::min(x0 + 1, p - 1);
      const double fx = x - double(x0);
      for (std::size_t b = 0; b < c; ++b) {
        const double v00 = src[(y0 * p + x0) * c + b], v01 = src[(y0 * p + x1) * c + b];
        const double v10 = src[(y1 * p + x0) * c + b], v11 = src[(y1 * p + x1) * c + b];
        const double top = v00 + fx * (v01 - v00);
        const double bottom = v10 + fx * (v11 - v10);
        out[(i * p + j) * c + b] = static_cast<float>(top + fy * (bottom - top));
      }
    }
  }
  return Tensor(patch.shape(), std::move(out));
}

Tensor swap_adjacent_bands(const Tensor& x, std::span<const std::size_t> lower_bands) {
  const std::size_t c = x.dim(x.rank() - 1);
  std::vector<float> out(x.data().begin(), x.data().end());
  for (const auto b : lower_bands) {
    if (b + 1 >= c) throw DimensionError("band swap index out of range");
    for (std::size_t base = 0; base < out.size(); base += c) {
      std::swap(out[base + b], out[base + b + 1]);
    }
  }
  return Tensor(x.shape(), std::move(out));
}

std::vector<std::size_t> sample_swap_pairs(std::size_t bands, std::size_t count, Rng& rng) {
  // Lay out `count` pair tokens among the remaining single bands; every set
  // of disjoint pairs corresponds to exactly one arrangement.
  count = std::min(count, bands / 2);
  const std::size_t tokens = bands - count;
  auto slots = choose_subset(tokens, count, rng);
  std::sort(slots.begin(), slots.end());
  std::vector<std::size_t> pairs;
  pairs.reserve(count);
  std::size_t band = 0, next = 0;
  for (std::size_t t = 0; t < tokens && next < slots.size(); ++t) {
    if (slots[next] == t) {
      pairs.push_back(band);
      band += 2;
      ++next;
    } else {
      ++band;
    }
  }
  return pairs;
}

Tensor zero_bands(const Tensor& x, std::span<const std::size_t> bands) {
  const std::size_t c = x.dim(x.rank() - 1);
  std::vector<float> out(x.data().begin(), x.data().end());
  for (const auto b : bands) {
    if (b >= c) throw DimensionError("band index out of range");
    for (std::size_t base = 0; base < out.size(); base += c) out[base + b] = 0.0f;
  }
  return Tensor(x.shape(), std::move(out));
}

Tensor zero_pixels(const Tensor& x, std::span<const std::size_t> positions) {
  const auto [p, c] = patch_dims(x);
  std::vector<float> out(x.data().begin(), x.data().end());
  for (const auto pos : positions) {
    if (pos >= p * p) throw DimensionError("pixel position out of range");
    std::fill_n(out.begin() + pos * c, c, 0.0f);
  }
  return Tensor(x.shape(), std::move(out));
}

Tensor apply_spatial(const Tensor& patch, const Transform& transform, Rng& rng) {
  if (!is_spatial(transform.kind)) {
    throw ConfigError(std::string(transform_name(transform.kind)) + " is not a spatial transform");
  }
  const auto [p, c] = patch_dims(patch);
  if (p == 1) {
    throw ConfigError("spatial transform " + std::string(transform_name(transform.kind)) +
                      " requires a patch larger than 1x1");
  }
  switch (transform.kind) {
    case TransformKind::flip:
      return flip_patch(patch, uniform_index(rng, 2) == 0 ? FlipAxis::horizontal
                                                         : FlipAxis::vertical);
    case TransformKind::rotation:
      return rotate_patch(patch, 1 + static_cast<int>(uniform_index(rng, 3)));
    case TransformKind::resized_crop: {
      const double size = double(p);
      const double area = uniform_real(rng, transform.param("min_area", 0.5), 1.0);
      const double aspect = uniform_real(rng, transform.param("min_aspect", 0.75),
                                         transform.param("max_aspect", 4.0 / 3.0));
      CropBox box;
      box.width = std::min(size, size * std::sqrt(area * aspect));
      box.height = std::min(size, size * std::sqrt(area / aspect));
      box.top = uniform_real(rng, 0.0, size - box.height);
      box.left = uniform_real(rng, 0.0, size - box.width);
      return resized_crop(patch, box);
    }
    default:
      break;
  }
  return patch;
}

Tensor apply_spectral(const Tensor& x, const Transform& transform, Rng& rng) {
  if (is_spatial(transform.kind)) {
    throw ConfigError(std::string(transform_name(transform.kind)) + " is not a spectral transform");
  }
  const auto [p, c] = patch_dims(x);
  std::vector<float> out(x.data().begin(), x.data().end());
  switch (transform.kind) {
    case TransformKind::scaling: {
      const double s = uniform_real(rng, transform.param("min", 0.9), transform.param("max", 1.1));
      for (auto& v : out) v = static_cast<float>(v * s);
      break;
    }
    case TransformKind::gaussian_noise: {
      const double sigma = transform.param("sigma", 0.1);
      for (auto& v : out) v = static_cast<float>(v + sigma * standard_normal(rng));
      break;
    }
    case TransformKind::translation: {
      const double bias = transform.param("sigma", 0.1) * standard_normal(rng);
      for (auto& v : out) v = static_cast<float>(v + bias);
      break;
    }
    case TransformKind::band_drop: {
      const double fraction = uniform_real(rng, 0.0, transform.param("max_fraction", 0.1));
      const auto count = static_cast<std::size_t>(std::floor(fraction * double(c)));
      return zero_bands(x, choose_subset(c, count, rng));
    }
    case TransformKind::pixel_removal: {
      if (p == 1) return x;
      const double fraction = uniform_real(rng, 0.0, transform.param("max_fraction", 0.1));
      const auto count = static_cast<std::size_t>(std::floor(fraction * double(p * p)));
      return zero_pixels(x, choose_subset(p * p, count, rng));
    }
    case TransformKind::band_swap: {
      const auto max_pairs = static_cast<std::size_t>(
          std::max(1.0, std::ceil(transform.param("max_fraction", 0.05) * double(c))));
      const auto count = 1 + uniform_index(rng, max_pairs);
      return swap_adjacent_bands(x, sample_swap_pairs(c, count, rng));
    }
    default:
      break;
  }
  return Tensor(x.shape(), std::move(out));
}

Tensor apply_augmentations(const Tensor& x, const AugmentationSpec& spec, Rng& rng) {
  Tensor current = x;
  for (const auto& t : spec.transforms()) {
    // Always draw so that the stream position does not depend on outcomes.
    const bool fire = uniform_unit(rng) < t.probability;
    if (!fire) continue;
    current = is_spatial(t.kind) ? apply_spatial(current, t, rng)
                                 : apply_spectral(current, t, rng);
  }
  return current;
}

std::string_view pair_mode_name(PairMode mode) {
  switch (mode) {
    case PairMode::same_input: return "same_input";
    case PairMode::overlapping_patches: return "overlapping_patches";
    case PairMode::neighbor_pixels: return "neighbor_pixels";
  }
  return "unknown";
}

PairMode parse_pair_mode(std::string_view name) {
  for (const auto mode : {PairMode::same_input, PairMode::overlapping_patches,
                          PairMode::neighbor_pixels}) {
    if (pair_mode_name(mode) == name) return mode;
  }
  throw ConfigError("unknown pair sampling mode '" + std::string(name) + "'");
}

void PairSamplingPolicy::validate() const {
  if (!(min_overlap_fraction > 0.0 && min_overlap_fraction <= 1.0)) {
    throw ConfigError("min_overlap_fraction must lie in (0, 1]");
  }
  if (neighborhood_size < 3 || neighborhood_size % 2 == 0) {
    throw ConfigError("neighborhood_size must be odd and >= 3");
  }
}

double overlap_fraction(std::size_t patch_size, Offset offset) {
  const auto p = static_cast<std::ptrdiff_t>(patch_size);
  const auto dr = std::abs(offset.rows), dc = std::abs(offset.cols);
  if (dr >= p || dc >= p) return 0.0;
  return double((p - dr) * (p - dc)) / double(p * p);
}

std::vector<Offset> admissible_offsets(std::size_t patch_size, double min_fraction) {
  const auto p = static_cast<std::ptrdiff_t>(patch_size);
  const auto area = p * p;
  std::vector<Offset> out;
  for (std::ptrdiff_t dr = -(p - 1); dr <= p - 1; ++dr) {
    for (std::ptrdiff_t dc = -(p - 1); dc <= p - 1; ++dc) {
      const auto inter = (p - std::abs(dr)) * (p - std::abs(dc));
      // Integer comparison avoids rounding at the threshold.
      if (double(inter) >= min_fraction * double(area) - 1e-9) out.push_back({dr, dc});
    }
  }
  return out;
}

std::vector<Offset> neighbor_offsets(std::size_t height, std::size_t width,
                                     std::size_t row, std::size_t col,
                                     std::size_t neighborhood_size) {
  const auto half = static_cast<std::ptrdiff_t>(neighborhood_size / 2);
  std::vector<Offset> out;
  for (std::ptrdiff_t dr = -half; dr <= half; ++dr) {
    for (std::ptrdiff_t dc = -half; dc <= half; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const auto r = static_cast<std::ptrdiff_t>(row) + dr;
      const auto c = static_cast<std::ptrdiff_t>(col) + dc;
      if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(height) ||
          c >= static_cast<std::ptrdiff_t>(width)) {
        continue;
      }
      out.push_back({dr, dc});
    }
  }
  return out;
}

namespace {

Offset pick_in_bounds(const Scene& scene, std::size_t row, std::size_t col,
                      const std::vector<Offset>& offsets, Rng& rng) {
  std::vector<Offset> valid;
  valid.reserve(offsets.size());
  for (const auto& o : offsets) {
    const auto r = static_cast<std::ptrdiff_t>(row) + o.rows;
    const auto c = static_cast<std::ptrdiff_t>(col) + o.cols;
    if (r >= 0 && c >= 0 && r < static_cast<std::ptrdiff_t>(scene.height) &&
        c < static_cast<std::ptrdiff_t>(scene.width)) {
      valid.push_back(o);
    }
  }
  return valid[uniform_index(rng, valid.size())];
}

std::size_t shifted(std::size_t base, std::ptrdiff_t delta) {
  return static_cast<std::size_t>(static_cast<std::ptrdiff_t>(base) + delta);
}

}  // namespace

PatchPair sample_overlapping_patch_pair(const Scene& scene, std::size_t row,
                                        std::size_t col, std::size_t patch_size,
                                        double min_overlap_fraction, Rng& rng) {
  auto first = extract_patch(scene, row, col, patch_size);
  const auto offset = pick_in_bounds(
      scene, row, col, admissible_offsets(patch_size, min_overlap_fraction), rng);
  auto second = extract_patch(scene, shifted(row, offset.rows), shifted(col, offset.cols),
                              patch_size);
  return {std::move(first), std::move(second), offset};
}

PatchPair sample_neighbor_pixel_pair(const Scene& scene, std::size_t row, std::size_t col,
                                     std::size_t neighborhood_size, Rng& rng) {
  const auto candidates =
      neighbor_offsets(scene.height, scene.width, row, col, neighborhood_size);
  if (candidates.empty()) throw ConfigError("a 1x1 scene has no neighbouring pixels");
  const auto offset = candidates[uniform_index(rng, candidates.size())];
  return {extract_patch(scene, row, col, 1),
          extract_patch(scene, shifted(row, offset.rows), shifted(col, offset.cols), 1),
          offset};
}

ViewPair make_views(const Scene& scene, std::size_t row, std::size_t col,
                    std::size_t patch_size, const PairSamplingPolicy& policy,
                    const AugmentationSpec& spec_a, const AugmentationSpec& spec_b,
                    Rng& rng) {
  policy.validate();
  if (patch_size == 1 && (spec_a.has_spatial() || spec_b.has_spatial())) {
    throw ConfigError("spatial transforms are not valid for single-pixel inputs");
  }
  PatchPair pair;
  switch (policy.mode) {
    case PairMode::same_input: {
      auto x = extract_patch(scene, row, col, patch_size);
      pair = {x, x, {}};
      break;
    }
    case PairMode::overlapping_patches:
      pair = sample_overlapping_patch_pair(scene, row, col, patch_size,
                                           policy.min_overlap_fraction, rng);
      break;
    case PairMode::neighbor_pixels: {
      const auto candidates =
          neighbor_offsets(scene.height, scene.width, row, col, policy.neighborhood_size);
      if (candidates.empty()) throw ConfigError("a 1x1 scene has no neighbouring pixels");
      const auto offset = candidates[uniform_index(rng, candidates.size())];
      pair = {extract_patch(scene, row, col, patch_size),
              extract_patch(scene, shifted(row, offset.rows), shifted(col, offset.cols),
                            patch_size),
              offset};
      break;
    }
  }
  ViewPair views;
  views.view_a = apply_augmentations(pair.first, spec_a, rng);
  views.view_b = apply_augmentations(pair.second, spec_b, rng);
  views.row = row;
  views.col = col;
  views.partner_offset = pair.offset;
  return views;
}

}  // namespace hsissl
