#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hsissl/barlow_twins.hpp"
#include "hsissl/classify.hpp"
#include "hsissl/models.hpp"
#include "hsissl/scene.hpp"
#include "hsissl/views.hpp"

namespace hsissl::cli {

struct AblateSettings {
  std::size_t epochs = 20;
  std::vector<TransformKind> transforms;  // empty = every transform
  std::size_t shots = 5;
  std::uint64_t seed = 0;
};

struct EvalSettings {
  std::filesystem::path checkpoint;
  std::size_t shots = 5;
  std::uint64_t seed = 0;
};

/// Everything one invocation needs. Read from a JSON document with the
/// sections scene, synth, model, pairs, augment, pretrain, classify, ablate,
/// eval plus top-level shots, seeds and checkpoint.
struct RunConfig {
  std::filesystem::path scene_path;
  std::filesystem::path labels_path;
  bool normalize = true;

  SyntheticSceneOptions synth;
  EncoderConfig encoder;  // input_bands is taken from the scene
  ProjectionHeadConfig projector;
  PairSamplingPolicy pairs;
  AugmentationSpec augment_a;
  AugmentationSpec augment_b;
  BarlowTwinsConfig pretrain;
  TrainConfig train;
  std::vector<Protocol> protocols{Protocol::supervised_baseline, Protocol::linear,
                                  Protocol::finetune};
  std::vector<std::size_t> shots{5};
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path checkpoint;  // pre-trained encoder for classify
  AblateSettings ablate;
  EvalSettings eval;
  std::filesystem::path out;

  static RunConfig from_json(const nlohmann::json& document);
};

/// Applies "a.b.c=value" to the document. The value is parsed as JSON when
/// it is valid JSON and kept as a string otherwise. Throws ConfigError for a
/// malformed assignment or a path through a non-object.
void apply_override(nlohmann::json& document, std::string_view assignment);

/// Reads the file (an empty document when `path` is empty) and applies the
/// overrides in order. Relative scene and checkpoint paths resolve against
/// the config file's directory.
nlohmann::json load_config_document(const std::filesystem::path& path,
                                    const std::vector<std::string>& overrides);

}  // namespace hsissl::cli
