#include <fstream>
#include <sstream>
#include <string>

#include "hsissl/error.hpp"
#include "hsissl/models.hpp"
#include "endian_io.hpp"

namespace hsissl {
namespace {

constexpr const char* kMagic = "hsissl-checkpoint 1";
constexpr const char* kEndHeader = "end_header";

std::string join(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::size_t to_size(const std::string& text, const std::string& key) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw FormatError("checkpoint key '" + key + "' is not an integer: '" + text + "'");
  }
}

std::vector<std::size_t> split_sizes(const std::string& text, const std::string& key) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_size(item, key));
  return out;
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("checkpoint header lacks '" + key + "'");
  return it->second;
}

void put_float(std::string& out, float v) {
  char buf[sizeof(float)];
  detail::store_le(v, buf);
  out.append(buf, sizeof(float));
}

float get_float(const char* p) { return detail::load_le<float>(p); }

}  // namespace

void save_checkpoint(EncoderModel& model, const std::filesystem::path& path,
                     const std::map<std::string, std::string>& metadata) {
  const auto& ec = model.encoder_config();
  const auto& pc = model.projector_config();
  auto params = model.parameters();
  auto buffers = model.buffers();

  std::size_t floats = 0;
  for (const auto& p : params) floats += p.tensor.numel();
  for (const auto& b : buffers) floats += b.values->size();

  std::ostringstream header;
  header << kMagic << '\n'
         << "kind=" << encoder_kind_name(ec.kind) << '\n'
         << "input_bands=" << ec.input_bands << '\n'
         << "patch_size=" << ec.patch_size << '\n'
         << "kernel_size=" << ec.kernel_size << '\n'
         << "widths=" << join(ec.widths) << '\n'
         << "embedding_dim=" << ec.embedding_dim << '\n'
         << "projector_hidden=" << join(pc.hidden_dims) << '\n'
         << "projector_dim=" << pc.output_dim << '\n'
         << "head_classes=" << model.num_classes() << '\n'
         << "frozen=" << (model.frozen() ? 1 : 0) << '\n';
  for (const auto& [key, value] : metadata) {
    if (value.find('\n') != std::string::npos) {
      throw ConfigError("checkpoint metadata values must be single-line");
    }
    header << "meta." << key << '=' << value << '\n';
  }
  header << "payload_floats=" << floats << '\n' << kEndHeader << '\n';

  std::string payload;
  payload.reserve(floats * sizeof(float));
  for (const auto& p : params) {
    for (const float v : p.tensor.data()) put_float(payload, v);
  }
  for (const auto& b : buffers) {
    for (const float v : *b.values) put_float(payload, v);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out << header.str();
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw FormatError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw FormatError(path.string() + " is not a checkpoint");
  }
  std::map<std::string, std::string> kv;
  std::map<std::string, std::string> metadata;
  bool terminated = false;
  while (std::getline(in, line)) {
    if (line == kEndHeader) {
      terminated = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("bad checkpoint header line '" + line + "'");
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key.rfind("meta.", 0) == 0) {
      metadata[key.substr(5)] = value;
    } else {
      kv[key] = value;
    }
  }
  if (!terminated) throw FormatError("checkpoint header is not terminated");

  EncoderConfig ec;
  ec.kind = parse_encoder_kind(need(kv, "kind"));
  ec.input_bands = to_size(need(kv, "input_bands"), "input_bands");
  ec.patch_size = to_size(need(kv, "patch_size"), "patch_size");
  ec.kernel_size = to_size(need(kv, "kernel_size"), "kernel_size");
  ec.widths = split_sizes(need(kv, "widths"), "widths");
  ec.embedding_dim = to_size(need(kv, "embedding_dim"), "embedding_dim");
  ProjectionHeadConfig pc;
  pc.hidden_dims = split_sizes(need(kv, "projector_hidden"), "projector_hidden");
  pc.output_dim = to_size(need(kv, "projector_dim"), "projector_dim");
  const auto classes = to_size(need(kv, "head_classes"), "head_classes");
  const auto floats = to_size(need(kv, "payload_floats"), "payload_floats");

  std::optional<EncoderModel> model;
  try {
    model.emplace(ec, pc, 0);
    if (classes > 0) model->attach_linear_head(classes);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint describes an invalid model: ") + e.what());
  }

  auto params = model->parameters();
  auto buffers = model->buffers();
  std::size_t expected = 0;
  for (const auto& p : params) expected += p.tensor.numel();
  for (const auto& b : buffers) expected += b.values->size();
  if (expected != floats) {
    throw FormatError("checkpoint carries " + std::to_string(floats) +
                      " values, the described model needs " + std::to_string(expected));
  }

  std::string payload(floats * sizeof(float), '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
    throw FormatError("checkpoint payload is truncated");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("checkpoint has trailing bytes after the payload");
  }

  const char* cursor = payload.data();
  for (auto& p : params) {
    for (auto& v : p.tensor.mutable_data()) {
      v = get_float(cursor);
      cursor += sizeof(float);
    }
  }
  for (auto& b : buffers) {
    for (auto& v : *b.values) {
      v = get_float(cursor);
      cursor += sizeof(float);
    }
  }
  if (kv.count("frozen") && kv.at("frozen") == "1") model->set_frozen(true);
  return Checkpoint{std::move(*model), std::move(metadata)};
}

}  // namespace hsissl
