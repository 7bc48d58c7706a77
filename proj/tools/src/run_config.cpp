#include "hsissl_cli/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "hsissl/error.hpp"

namespace hsissl::cli {
namespace {

using nlohmann::json;

// Typed access to one object section that rejects unknown keys.
class Section {
 public:
  Section(const json& document, std::string name) : name_(std::move(name)) {
    if (document.is_null()) return;
    if (!document.is_object()) throw ConfigError("'" + name_ + "' must be an object");
    node_ = &document;
  }

  template <typename T>
  void read(const char* key, T& target) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    try {
      target = node_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key) + ": " + e.what());
    }
  }

  const json* raw(const char* key) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return nullptr;
    return &node_->at(key);
  }

  std::string path(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

  void finish() const {
    if (!node_) return;
    for (const auto& item : node_->items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config key " + path(item.key().c_str()));
    }
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> seen_;
};

const json& child(const json& document, const char* key) {
  static const json null_json;
  return document.contains(key) ? document.at(key) : null_json;
}

AugmentationSpec parse_spec(const json& value, const std::string& where) {
  if (!value.is_array()) throw ConfigError(where + " must be an array of transforms");
  return AugmentationSpec::from_json(value.dump());
}

}  // namespace

RunConfig RunConfig::from_json(const json& document) {
  if (!document.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  Section top(document, "");

  {
    Section s(child(document, "scene"), "scene");
    std::string path, labels;
    s.read("path", path);
    s.read("labels", labels);
    s.read("normalize", c.normalize);
    c.scene_path = path;
    c.labels_path = labels;
    s.finish();
    top.raw("scene");
  }
  {
    Section s(child(document, "synth"), "synth");
    s.read("num_classes", c.synth.num_classes);
    s.read("height", c.synth.height);
    s.read("width", c.synth.width);
    s.read("bands", c.synth.bands);
    s.read("noise_sigma", c.synth.noise_sigma);
    s.read("blob_scale", c.synth.blob_scale);
    s.read("seed", c.synth.seed);
    s.finish();
    top.raw("synth");
  }
  {
    Section s(child(document, "model"), "model");
    std::string kind = std::string(encoder_kind_name(c.encoder.kind));
    s.read("kind", kind);
    c.encoder.kind = parse_encoder_kind(kind);
    s.read("patch_size", c.encoder.patch_size);
    s.read("widths", c.encoder.widths);
    s.read("embedding_dim", c.encoder.embedding_dim);
    s.read("kernel_size", c.encoder.kernel_size);
    s.read("projector_hidden", c.projector.hidden_dims);
    s.read("projector_dim", c.projector.output_dim);
    s.finish();
    top.raw("model");
  }
  {
    Section s(child(document, "pairs"), "pairs");
    std::string mode = std::string(pair_mode_name(c.pairs.mode));
    s.read("mode", mode);
    c.pairs.mode = parse_pair_mode(mode);
    s.read("min_overlap_fraction", c.pairs.min_overlap_fraction);
    s.read("neighborhood_size", c.pairs.neighborhood_size);
    s.finish();
    top.raw("pairs");
  }
  if (const json* augment = top.raw("augment")) {
    if (augment->is_array()) {
      c.augment_a = parse_spec(*augment, "augment");
      c.augment_b = c.augment_a;
    } else {
      Section s(*augment, "augment");
      if (const json* a = s.raw("a")) c.augment_a = parse_spec(*a, "augment.a");
      if (const json* b = s.raw("b")) c.augment_b = parse_spec(*b, "augment.b");
      s.finish();
    }
  }
  {
    Section s(child(document, "pretrain"), "pretrain");
    auto& p = c.pretrain;
    s.read("lambda", p.lambda);
    s.read("batch_size", p.batch_size);
    s.read("epochs", p.epochs);
    s.read("base_lr", p.base_lr);
    s.read("weight_decay", p.weight_decay);
    s.read("momentum", p.momentum);
    s.read("trust_coefficient", p.lars_trust_coefficient);
    s.read("lars_eps", p.lars_eps);
    s.read("warmup_epochs", p.warmup_epochs);
    s.read("center", p.center);
    s.read("divergence_factor", p.divergence_factor);
    s.finish();
    top.raw("pretrain");
  }
  {
    Section s(child(document, "classify"), "classify");
    auto& t = c.train;
    if (const json* protocols = s.raw("protocols")) {
      c.protocols.clear();
      try {
        for (const auto& name : protocols->get<std::vector<std::string>>()) {
          c.protocols.push_back(parse_protocol(name));
        }
      } catch (const json::exception& e) {
        throw ConfigError(std::string("classify.protocols: ") + e.what());
      }
      if (c.protocols.empty()) throw ConfigError("classify.protocols is empty");
    }
    s.read("epochs", t.epochs);
    s.read("lr", t.lr);
    s.read("momentum", t.momentum);
    s.read("weight_decay", t.weight_decay);
    s.read("finetune_encoder_lr_scale", t.finetune_encoder_lr_scale);
    s.read("batch_size", t.batch_size);
    s.finish();
    top.raw("classify");
  }
  {
    Section s(child(document, "ablate"), "ablate");
    s.read("epochs", c.ablate.epochs);
    s.read("shots", c.ablate.shots);
    s.read("seed", c.ablate.seed);
    if (const json* names = s.raw("transforms")) {
      try {
        for (const auto& name : names->get<std::vector<std::string>>()) {
          c.ablate.transforms.push_back(parse_transform_kind(name));
        }
      } catch (const json::exception& e) {
        throw ConfigError(std::string("ablate.transforms: ") + e.what());
      }
    }
    s.finish();
    top.raw("ablate");
  }
  {
    Section s(child(document, "eval"), "eval");
    std::string checkpoint;
    s.read("checkpoint", checkpoint);
    c.eval.checkpoint = checkpoint;
    s.read("shots", c.eval.shots);
    s.read("seed", c.eval.seed);
    s.finish();
    top.raw("eval");
  }
  top.read("shots", c.shots);
  top.read("seeds", c.seeds);
  std::string checkpoint, out;
  top.read("checkpoint", checkpoint);
  top.read("out", out);
  c.checkpoint = checkpoint;
  c.out = out;
  top.finish();

  if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
  if (c.shots.empty()) throw ConfigError("shots must not be empty");
  c.pretrain.validate();
  c.pairs.validate();
  c.train.validate();
  c.projector.validate();
  return c;
}

void apply_override(json& document, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &document;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (node->is_null()) *node = json::object();
    if (!node->is_object()) {
      throw ConfigError("override '" + key + "' descends into a non-object");
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

json load_config_document(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
  json document = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream text;
    text << in.rdbuf();
    document = json::parse(text.str(), nullptr, false);
    if (document.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
    if (!document.is_object()) throw ConfigError("config must be a JSON object");

    // Paths inside the file are relative to the file itself.
    const auto base = path.parent_path();
    auto resolve = [&](json& node, const char* key) {
      if (node.is_object() && node.contains(key) && node[key].is_string()) {
        const std::filesystem::path p = node[key].get<std::string>();
        if (!p.empty() && p.is_relative()) node[key] = (base / p).lexically_normal().string();
      }
    };
    if (document.contains("scene")) {
      resolve(document["scene"], "path");
      resolve(document["scene"], "labels");
    }
    if (document.contains("eval")) resolve(document["eval"], "checkpoint");
    resolve(document, "checkpoint");
  }
  for (const auto& o : overrides) apply_override(document, o);
  return document;
}

}  // namespace hsissl::cli
