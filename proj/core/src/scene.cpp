#include "hsissl/scene.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>

#include "hsissl/error.hpp"
#include "hsissl/rng.hpp"
#include "endian_io.hpp"

namespace hsissl {
namespace fs = std::filesystem;

namespace {

using detail::load_le;
using detail::store_le;
using Header = std::map<std::string, std::string>;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

Header read_header(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open header " + path.string());
  Header header;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected key=value");
    }
    header[trim(std::string_view(text).substr(0, eq))] =
        trim(std::string_view(text).substr(eq + 1));
  }
  return header;
}

const std::string& require_key(const Header& header, const std::string& key,
                               const fs::path& path) {
  const auto it = header.find(key);
  if (it == header.end()) {
    throw FormatError(path.string() + ": missing header key '" + key + "'");
  }
  return it->second;
}

std::size_t parse_extent(const Header& header, const std::string& key,
                         const fs::path& path) {
  const auto& text = require_key(header, key, path);
  std::size_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || value == 0) {
    throw FormatError(path.string() + ": '" + key +
                      "' must be a positive integer, got '" + text + "'");
  }
  return value;
}

void expect_value(const Header& header, const std::string& key,
                  const std::string& expected, const fs::path& path,
                  bool required = true) {
  const auto it = header.find(key);
  if (it == header.end()) {
    if (required) throw FormatError(path.string() + ": missing header key '" + key + "'");
    return;
  }
  if (it->second != expected) {
    throw FormatError(path.string() + ": unsupported " + key + "='" + it->second +
                      "' (expected " + expected + ")");
  }
}

std::vector<double> parse_wavelengths(const std::string& text, const fs::path& path) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto token = trim(item);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || end != token.data() + token.size()) {
      throw FormatError(path.string() + ": bad wavelength '" + token + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<char> read_payload(const fs::path& path, std::size_t expected_bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open payload " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size != expected_bytes) {
    throw FormatError(path.string() + ": payload holds " + std::to_string(size) +
                      " bytes, header implies " + std::to_string(expected_bytes));
  }
  in.seekg(0);
  std::vector<char> bytes(size);
  in.read(bytes.data(), static_cast<std::streamsize>(size));
  if (!in) throw FormatError(path.string() + ": short read");
  return bytes;
}

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("write failed for " + path.string());
}

void write_bytes(const fs::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace

void Scene::validate() const {
  if (height == 0 || width == 0 || bands == 0) {
    throw FormatError("scene extents must be positive");
  }
  if (values.size() != height * width * bands) {
    throw FormatError("scene holds " + std::to_string(values.size()) +
                      " values, extents imply " + std::to_string(height * width * bands));
  }
  for (const float v : values) {
    if (!std::isfinite(v)) throw FormatError("scene contains non-finite values");
  }
  if (!wavelengths.empty()) {
    if (wavelengths.size() != bands) {
      throw FormatError("scene lists " + std::to_string(wavelengths.size()) +
                        " wavelengths for " + std::to_string(bands) + " bands");
    }
    for (std::size_t i = 1; i < wavelengths.size(); ++i) {
      if (!(wavelengths[i] > wavelengths[i - 1])) {
        throw FormatError("wavelengths must be strictly increasing");
      }
    }
  }
}

std::size_t LabelMap::num_classes() const {
  std::uint16_t top = 0;
  for (const auto l : labels) top = std::max(top, l);
  return top;
}

void LabelMap::validate() const {
  if (height == 0 || width == 0) throw FormatError("label map extents must be positive");
  if (labels.size() != height * width) {
    throw FormatError("label map holds " + std::to_string(labels.size()) +
                      " values, extents imply " + std::to_string(height * width));
  }
}

fs::path payload_path_for(const fs::path& header) {
  auto payload = header;
  payload.replace_extension(".raw");
  return payload;
}

Scene load_scene(const fs::path& header_path) {
  const auto header = read_header(header_path);
  expect_value(header, "dtype", "float32", header_path);
  expect_value(header, "interleave", "bsq", header_path, false);
  Scene scene;
  scene.height = parse_extent(header, "height", header_path);
  scene.width = parse_extent(header, "width", header_path);
  scene.bands = parse_extent(header, "bands", header_path);
  if (const auto it = header.find("wavelengths"); it != header.end() && !it->second.empty()) {
    scene.wavelengths = parse_wavelengths(it->second, header_path);
  }

  const std::size_t plane = scene.height * scene.width;
  const auto bytes = read_payload(payload_path_for(header_path),
                                  plane * scene.bands * sizeof(float));
  scene.values.resize(plane * scene.bands);
  for (std::size_t b = 0; b < scene.bands; ++b) {
    for (std::size_t i = 0; i < plane; ++i) {
      scene.values[i * scene.bands + b] =
          load_le<float>(bytes.data() + (b * plane + i) * sizeof(float));
    }
  }
  scene.validate();
  return scene;
}

LabelMap load_label_map(const fs::path& header_path) {
  const auto header = read_header(header_path);
  expect_value(header, "dtype", "uint16", header_path);
  if (header.count("bands")) expect_value(header, "bands", "1", header_path);
  LabelMap labels;
  labels.height = parse_extent(header, "height", header_path);
  labels.width = parse_extent(header, "width", header_path);
  const std::size_t n = labels.height * labels.width;
  const auto bytes = read_payload(payload_path_for(header_path), n * sizeof(std::uint16_t));
  labels.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels.labels[i] = load_le<std::uint16_t>(bytes.data() + i * sizeof(std::uint16_t));
  }
  return labels;
}

LoadedScene load_scene(const fs::path& header,
                       const std::optional<fs::path>& labels_header) {
  LoadedScene loaded{load_scene(header), std::nullopt};
  if (labels_header) {
    auto labels = load_label_map(*labels_header);
    if (labels.height != loaded.scene.height || labels.width != loaded.scene.width) {
      throw ConsistencyError("label map is " + std::to_string(labels.height) + "x" +
                             std::to_string(labels.width) + " but scene is " +
                             std::to_string(loaded.scene.height) + "x" +
                             std::to_string(loaded.scene.width));
    }
    loaded.labels = std::move(labels);
  }
  return loaded;
}

void save_scene(const Scene& scene, const fs::path& header_path) {
  scene.validate();
  std::ostringstream header;
  header << "height=" << scene.height << '\n'
         << "width=" << scene.width << '\n'
         << "bands=" << scene.bands << '\n'
         << "dtype=float32\n"
         << "interleave=bsq\n";
  if (!scene.wavelengths.empty()) {
    header << "wavelengths=";
    for (std::size_t i = 0; i < scene.wavelengths.size(); ++i) {
      if (i) header << ',';
      header << format_double(scene.wavelengths[i]);
    }
    header << '\n';
  }
  const std::size_t plane = scene.height * scene.width;
  std::vector<char> bytes(plane * scene.bands * sizeof(float));
  for (std::size_t b = 0; b < scene.bands; ++b) {
    for (std::size_t i = 0; i < plane; ++i) {
      store_le(scene.values[i * scene.bands + b],
               bytes.data() + (b * plane + i) * sizeof(float));
    }
  }
  write_file(header_path, header.str());
  write_bytes(payload_path_for(header_path), bytes);
}

void save_label_map(const LabelMap& labels, const fs::path& header_path) {
  labels.validate();
  std::ostringstream header;
  header << "height=" << labels.height << '\n'
         << "width=" << labels.width << '\n'
         << "bands=1\n"
         << "dtype=uint16\n"
         << "interleave=bsq\n";
  std::vector<char> bytes(labels.labels.size() * sizeof(std::uint16_t));
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    store_le(labels.labels[i], bytes.data() + i * sizeof(std::uint16_t));
  }
  write_file(header_path, header.str());
  write_bytes(payload_path_for(header_path), bytes);
}

NormalizedScene normalize_per_band(const Scene& scene) {
  NormalizedScene result{scene, {}};
  const std::size_t n = scene.pixel_count();
  const std::size_t c = scene.bands;
  for (std::size_t b = 0; b < c; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += scene.values[i * c + b];
    const double mean = s / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = scene.values[i * c + b] - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0.0)) {
      result.constant_bands.push_back(b);
      for (std::size_t i = 0; i < n; ++i) result.scene.values[i * c + b] = 0.0f;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      result.scene.values[i * c + b] =
          static_cast<float>((scene.values[i * c + b] - mean) / sd);
    }
  }
  return result;
}

std::size_t reflect_index(std::ptrdiff_t index, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t i = index % period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

Tensor extract_patch(const Scene& scene, std::size_t row, std::size_t col,
                     std::size_t patch_size) {
  if (patch_size == 0 || patch_size % 2 == 0) {
    throw ConfigError("patch size must be odd, got " + std::to_string(patch_size));
  }
  if (row >= scene.height || col >= scene.width) {
    throw DimensionError("patch centre (" + std::to_string(row) + ", " +
                         std::to_string(col) + ") outside scene");
  }
  const auto half = static_cast<std::ptrdiff_t>(patch_size / 2);
  const std::size_t c = scene.bands;
  std::vector<float> values(patch_size * patch_size * c);
  for (std::size_t i = 0; i < patch_size; ++i) {
    const auto r = reflect_index(static_cast<std::ptrdiff_t>(row) - half +
                                     static_cast<std::ptrdiff_t>(i),
                                 scene.height);
    for (std::size_t j = 0; j < patch_size; ++j) {
      const auto q = reflect_index(static_cast<std::ptrdiff_t>(col) - half +
                                       static_cast<std::ptrdiff_t>(j),
                                   scene.width);
      const auto src = scene.pixel(r, q);
      std::copy(src.begin(), src.end(), values.begin() + (i * patch_size + j) * c);
    }
  }
  return Tensor(Shape{patch_size, patch_size, c}, std::move(values));
}

FewShotSplit sample_few_shot(const LabelMap& labels, std::size_t shots,
                             std::uint64_t seed) {
  labels.validate();
  if (shots == 0) throw SplitError("shots per class must be at least 1");
  const std::size_t classes = labels.num_classes();
  if (classes == 0) throw SplitError("label map has no labeled pixels");

  std::vector<std::vector<LabeledPixel>> by_class(classes);
  for (std::size_t r = 0; r < labels.height; ++r) {
    for (std::size_t c = 0; c < labels.width; ++c) {
      const auto id = labels.at(r, c);
      if (id != 0) by_class[id - 1].push_back({r, c, static_cast<int>(id) - 1});
    }
  }

  FewShotSplit split;
  split.shots = shots;
  split.seed = seed;
  split.num_classes = classes;
  for (std::size_t k = 0; k < classes; ++k) {
    auto& pool = by_class[k];
    if (pool.size() < shots) {
      throw SplitError("class " + std::to_string(k + 1) + " has " +
                       std::to_string(pool.size()) + " labeled pixels, fewer than K=" +
                       std::to_string(shots));
    }
    // Partial Fisher-Yates: the first `shots` entries become the sample.
    Rng rng(derive_seed(seed, "few_shot", k));
    for (std::size_t i = 0; i < shots; ++i) {
      const auto j = i + uniform_index(rng, pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    split.train.insert(split.train.end(), pool.begin(), pool.begin() + shots);
    split.test.insert(split.test.end(), pool.begin() + shots, pool.end());
  }
  auto raster_order = [](const LabeledPixel& a, const LabeledPixel& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  };
  std::sort(split.test.begin(), split.test.end(), raster_order);
  return split;
}

}  // namespace hsissl
