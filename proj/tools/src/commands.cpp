#include "hsissl_cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "hsissl/error.hpp"
#include "hsissl/rng.hpp"

namespace hsissl::cli {
namespace {

namespace fs = std::filesystem;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("failed writing " + path.string());
}

fs::path output_dir(const RunConfig& config) {
  if (config.out.empty()) throw ConfigError("no output directory (--out)");
  fs::create_directories(config.out);
  return config.out;
}

void require_file(const fs::path& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is not set");
  if (!fs::exists(path)) throw ConfigError(what + " " + path.string() + " does not exist");
}

struct Inputs {
  Scene scene;
  std::optional<LabelMap> labels;
};

Inputs load_inputs(const RunConfig& config, bool need_labels, std::ostream& log) {
  require_file(config.scene_path, "scene.path");
  std::optional<fs::path> labels_path;
  if (need_labels || !config.labels_path.empty()) {
    require_file(config.labels_path, "scene.labels");
    labels_path = config.labels_path;
  }
  auto loaded = load_scene(config.scene_path, labels_path);
  Inputs inputs{std::move(loaded.scene), std::move(loaded.labels)};
  if (config.normalize) {
    auto normalized = normalize_per_band(inputs.scene);
    if (normalized.has_warning()) {
      log << "warning: " << normalized.constant_bands.size()
          << " constant band(s) set to zero after normalization\n";
    }
    inputs.scene = std::move(normalized.scene);
  }
  return inputs;
}

EncoderConfig encoder_for(const RunConfig& config, const Scene& scene) {
  EncoderConfig ec = config.encoder;
  ec.input_bands = scene.bands;
  return ec;
}

BarlowTwinsConfig pretrain_config(const RunConfig& config, std::size_t epochs) {
  BarlowTwinsConfig bt = config.pretrain;
  bt.epochs = epochs;
  return bt;
}

}  // namespace

void cmd_synth(const RunConfig& config, std::ostream& log) {
  const auto out = output_dir(config);
  const auto synthetic = generate_synthetic_scene(config.synth);
  save_scene(synthetic.scene, out / "scene.hdr");
  save_label_map(synthetic.labels, out / "labels.hdr");

  std::vector<std::size_t> counts(config.synth.num_classes, 0);
  for (auto l : synthetic.labels.labels) ++counts[l - 1];
  log << "synthetic scene " << synthetic.scene.height << "x" << synthetic.scene.width << "x"
      << synthetic.scene.bands << ", " << config.synth.num_classes << " classes, seed "
      << config.synth.seed << ", layout attempts " << synthetic.layout_attempts << "\n";
  for (std::size_t k = 0; k < counts.size(); ++k) {
    log << "  class " << k + 1 << ": " << counts[k] << " pixels\n";
  }
  log << "wrote " << (out / "scene.hdr").string() << " and " << (out / "labels.hdr").string()
      << "\n";
}

void cmd_pretrain(const RunConfig& config, std::ostream& log) {
  const auto out = output_dir(config);
  const auto inputs = load_inputs(config, false, log);
  const std::uint64_t seed = config.seeds.front();
  EncoderModel model(encoder_for(config, inputs.scene), config.projector,
                     derive_seed(seed, "cli/model"));
  const auto result = pretrain(inputs.scene, model, config.pairs, config.augment_a,
                               config.augment_b, config.pretrain, seed,
                               [&](std::size_t epoch, double loss) {
                                 log << "epoch " << epoch << "/" << config.pretrain.epochs
                                     << " loss " << loss << "\n";
                               });
  save_checkpoint(model, out / "encoder.ckpt",
                  {{"stage", "pretrain"}, {"seed", std::to_string(seed)}});
  write_text(out / "pretrain_loss.csv", loss_history_csv(result.epoch_losses));
  log << "wrote " << (out / "encoder.ckpt").string() << "\n";
}

void cmd_classify(const RunConfig& config, std::ostream& log) {
  const auto out = output_dir(config);
  const auto inputs = load_inputs(config, true, log);

  bool needs_encoder = false;
  for (auto p : config.protocols) needs_encoder |= p != Protocol::supervised_baseline;
  std::optional<Checkpoint> pretrained;
  if (needs_encoder) {
    if (config.checkpoint.empty()) {
      throw ConfigError("a pre-trained checkpoint is required for the linear and finetune "
                        "protocols (set checkpoint)");
    }
    require_file(config.checkpoint, "checkpoint");
    pretrained.emplace(load_checkpoint(config.checkpoint));
    if (pretrained->model.encoder_config().input_bands != inputs.scene.bands) {
      throw ConfigError("checkpoint expects " +
                        std::to_string(pretrained->model.encoder_config().input_bands) +
                        " bands, scene has " + std::to_string(inputs.scene.bands));
    }
  }

  std::vector<SummaryCell> cells;
  for (const auto shots : config.shots) {
    for (const auto seed : config.seeds) {
      const auto split = sample_few_shot(*inputs.labels, shots, seed);
      for (const auto protocol : config.protocols) {
        // The baseline shares the pre-trained architecture when there is one.
        EncoderModel model =
            pretrained ? pretrained->model.clone()
                       : EncoderModel(encoder_for(config, inputs.scene), config.projector,
                                      derive_seed(seed, "cli/model"));
        TrainConfig train = config.train;
        train.protocol = protocol;
        train.seed = seed;
        train_classifier(model, inputs.scene, split, train);
        auto report = evaluate(model, inputs.scene, split);
        report.protocol = std::string(protocol_name(protocol));

        const std::string cell = std::string(protocol_name(protocol)) + "_K" +
                                 std::to_string(shots) + "_seed" + std::to_string(seed);
        write_text(out / ("metrics_" + cell + ".json"), report.to_json());
        save_checkpoint(model, out / ("classifier_" + cell + ".ckpt"),
                        {{"protocol", report.protocol},
                         {"shots", std::to_string(shots)},
                         {"seed", std::to_string(seed)}});
        cells.push_back({protocol, shots, report.overall_accuracy, report.kappa});
        log << report.protocol << " K=" << shots << " seed=" << seed
            << " OA=" << fixed6(report.overall_accuracy) << " kappa=" << fixed6(report.kappa)
            << "\n";
      }
    }
  }
  write_text(out / "summary.csv", summary_csv(cells, config.protocols, config.shots));
}

void cmd_ablate(const RunConfig& config, std::ostream& log) {
  const auto out = output_dir(config);
  const auto inputs = load_inputs(config, true, log);
  const auto encoder = encoder_for(config, inputs.scene);

  std::vector<TransformKind> kinds = config.ablate.transforms;
  if (kinds.empty()) {
    for (auto k : all_transform_kinds()) {
      if (encoder.input_patch_size() > 1 || !is_spatial(k)) kinds.push_back(k);
    }
  }
  // A transform listed in the augment section keeps its parameters here.
  auto transform_for = [&](TransformKind kind) {
    for (const auto& t : config.augment_a.transforms()) {
      if (t.kind == kind) return t;
    }
    Transform t;
    t.kind = kind;
    return t;
  };

  const auto split = sample_few_shot(*inputs.labels, config.ablate.shots, config.ablate.seed);
  const auto bt = pretrain_config(config, config.ablate.epochs);
  auto run = [&](const std::vector<Transform>& transforms) {
    const AugmentationSpec spec(transforms);
    const auto seed = config.ablate.seed;
    EncoderModel model(encoder, config.projector, derive_seed(seed, "cli/model"));
    pretrain(inputs.scene, model, config.pairs, spec, spec, bt, seed);
    TrainConfig train = config.train;
    train.protocol = Protocol::linear;
    train.seed = seed;
    train_classifier(model, inputs.scene, split, train);
    return evaluate(model, inputs.scene, split).overall_accuracy;
  };

  const std::size_t n = kinds.size();
  std::vector<std::vector<double>> matrix(n, std::vector<double>(n, 0.0));
  std::vector<std::string> names;
  for (auto k : kinds) names.emplace_back(transform_name(k));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      std::vector<Transform> transforms{transform_for(kinds[i])};
      if (j != i) transforms.push_back(transform_for(kinds[j]));
      const double oa = run(transforms);
      matrix[i][j] = matrix[j][i] = oa;
      log << names[i] << " + " << names[j] << ": OA " << fixed6(oa) << "\n";
    }
  }
  const double baseline = run({});
  log << "no augmentation: OA " << fixed6(baseline) << "\n";
  write_text(out / "ablation_matrix.csv", ablation_matrix_csv(names, matrix));
  write_text(out / "ablation_no_augmentation.csv", "oa\n" + fixed6(baseline) + "\n");
}

void cmd_eval(const RunConfig& config, std::ostream& log) {
  const auto out = output_dir(config);
  const auto inputs = load_inputs(config, true, log);
  require_file(config.eval.checkpoint, "eval.checkpoint");
  auto checkpoint = load_checkpoint(config.eval.checkpoint);
  auto& model = checkpoint.model;
  if (!model.has_head()) {
    throw ConfigError("checkpoint " + config.eval.checkpoint.string() +
                      " has no classification head");
  }
  const auto split = sample_few_shot(*inputs.labels, config.eval.shots, config.eval.seed);
  auto report = evaluate(model, inputs.scene, split);
  const auto protocol = checkpoint.metadata.find("protocol");
  report.protocol = protocol == checkpoint.metadata.end() ? "unknown" : protocol->second;
  write_text(out / "metrics_eval.json", report.to_json());

  const auto predicted = predict_scene(model, inputs.scene);
  write_label_pgm(out / "prediction_map.pgm", inputs.scene.height, inputs.scene.width,
                  predicted, model.num_classes());
  log << "OA=" << fixed6(report.overall_accuracy) << " kappa=" << fixed6(report.kappa)
      << " over " << report.n_test << " test pixels\n";
}

std::string summary_csv(const std::vector<SummaryCell>& cells,
                        const std::vector<Protocol>& protocols,
                        const std::vector<std::size_t>& shots) {
  std::ostringstream out;
  out << "method,metric";
  for (auto k : shots) out << ",K" << k;
  out << "\n";
  for (auto protocol : protocols) {
    for (const char* metric : {"oa", "kappa"}) {
      out << protocol_name(protocol) << ',' << metric;
      for (auto k : shots) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& c : cells) {
          if (c.protocol != protocol || c.shots != k) continue;
          sum += metric[0] == 'o' ? c.oa : c.kappa;
          ++count;
        }
        out << ',' << (count ? fixed6(sum / double(count)) : std::string());
      }
      out << "\n";
    }
  }
  return out.str();
}

std::string ablation_matrix_csv(const std::vector<std::string>& names,
                                const std::vector<std::vector<double>>& values) {
  std::ostringstream out;
  out << "transform";
  for (const auto& n : names) out << ',' << n;
  out << "\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i];
    for (std::size_t j = 0; j < names.size(); ++j) out << ',' << fixed6(values[i][j]);
    out << "\n";
  }
  return out.str();
}

}  // namespace hsissl::cli
