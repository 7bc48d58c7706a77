#include <algorithm>
#include <cmath>
#include <numeric>

#include "hsissl/classify.hpp"
#include "hsissl/error.hpp"
#include "hsissl/rng.hpp"

namespace hsissl {

std::string_view protocol_name(Protocol protocol) {
  switch (protocol) {
    case Protocol::linear: return "linear";
    case Protocol::finetune: return "finetune";
    case Protocol::supervised_baseline: return "supervised_baseline";
  }
  return "unknown";
}

Protocol parse_protocol(std::string_view name) {
  for (auto p : {Protocol::linear, Protocol::finetune, Protocol::supervised_baseline}) {
    if (protocol_name(p) == name) return p;
  }
  throw ConfigError("unknown protocol '" + std::string(name) +
                    "' (expected linear, finetune or supervised_baseline)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("classifier epochs must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("classifier lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(finetune_encoder_lr_scale >= 0.0)) {
    throw ConfigError("finetune_encoder_lr_scale must be >= 0");
  }
}

namespace {

struct ParameterGroup {
  std::vector<NamedParameter> parameters;
  double lr_scale = 1.0;
};

// Heavy-ball SGD: v <- m v + g + wd w, w <- w - lr * scale * v. Weight decay
// skips parameters flagged exclude_from_adaptation.
class Sgd {
 public:
  Sgd(std::vector<ParameterGroup> groups, double lr, double momentum, double weight_decay)
      : groups_(std::move(groups)), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
    for (const auto& g : groups_) {
      for (const auto& p : g.parameters) velocity_.emplace_back(p.tensor.numel(), 0.0f);
    }
  }

  void step() {
    std::size_t slot = 0;
    for (auto& group : groups_) {
      const double lr = lr_ * group.lr_scale;
      for (auto& param : group.parameters) {
        auto& v = velocity_[slot++];
        if (!param.tensor.requires_grad() || !param.tensor.has_grad()) continue;
        auto w = param.tensor.mutable_data();
        const auto g = param.tensor.grad();
        const double wd = param.exclude_from_adaptation ? 0.0 : weight_decay_;
        for (std::size_t k = 0; k < w.size(); ++k) {
          if (!std::isfinite(g[k])) {
            throw NumericalError("non-finite gradient in " + param.name);
          }
          v[k] = static_cast<float>(momentum_ * v[k] + g[k] + wd * w[k]);
          w[k] = static_cast<float>(w[k] - lr * v[k]);
        }
      }
    }
  }

  void zero_grad() {
    for (auto& group : groups_) {
      for (auto& p : group.parameters) p.tensor.zero_grad();
    }
  }

 private:
  std::vector<ParameterGroup> groups_;
  std::vector<std::vector<float>> velocity_;
  double lr_, momentum_, weight_decay_;
};

void check_model_matches(const EncoderModel& model, const Scene& scene) {
  if (model.encoder_config().input_bands != scene.bands) {
    throw ConfigError("model expects " + std::to_string(model.encoder_config().input_bands) +
                      " bands, scene has " + std::to_string(scene.bands));
  }
}

Tensor batch_for(const Scene& scene, std::span<const LabeledPixel> pixels,
                 const EncoderConfig& config) {
  std::vector<Tensor> patches;
  patches.reserve(pixels.size());
  for (const auto& px : pixels) {
    patches.push_back(extract_patch(scene, px.row, px.col, config.input_patch_size()));
  }
  return make_input_batch(patches, config);
}

}  // namespace

TrainResult train_classifier(EncoderModel& model, const Scene& scene, const FewShotSplit& split,
                             const TrainConfig& config) {
  config.validate();
  check_model_matches(model, scene);
  if (split.train.empty()) throw ConfigError("few-shot split has no training pixels");
  if (split.num_classes < 2) throw ConfigError("a classifier needs at least 2 classes");
  for (const auto& px : split.train) {
    if (px.row >= scene.height || px.col >= scene.width) {
      throw DimensionError("training pixel outside the scene");
    }
  }

  std::vector<ParameterGroup> groups;
  bool encoder_training = false;
  switch (config.protocol) {
    case Protocol::linear:
      model.set_frozen(true);
      break;
    case Protocol::finetune:
      model.set_frozen(false);
      groups.push_back({model.encoder_parameters(), config.finetune_encoder_lr_scale});
      break;
    case Protocol::supervised_baseline:
      model.reinitialize(derive_seed(config.seed, "classify/baseline_init"));
      model.set_frozen(false);
      groups.push_back({model.encoder_parameters(), 1.0});
      encoder_training = true;
      break;
  }
  model.attach_linear_head(split.num_classes);
  groups.push_back({model.head_parameters(), 1.0});
  Sgd optimizer(std::move(groups), config.lr, config.momentum, config.weight_decay);

  const std::size_t n = split.train.size();
  const std::size_t batch = config.batch_size == 0 ? n : std::min(config.batch_size, n);
  TrainResult result;
  result.steps_per_epoch = (n + batch - 1) / batch;
  result.examples_per_epoch = n;

  std::vector<std::size_t> order(n);
  std::vector<LabeledPixel> chunk;
  std::vector<int> labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, "classify/shuffle", epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    double weighted_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      chunk.clear();
      labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        chunk.push_back(split.train[order[i]]);
        labels.push_back(chunk.back().label);
      }
      if (encoder_training && chunk.size() < 2) continue;  // batch statistics need two samples
      const auto inputs = batch_for(scene, chunk, model.encoder_config());
      const auto loss = softmax_cross_entropy(model.forward_classifier(inputs, encoder_training),
                                              std::span<const int>(labels));
      optimizer.zero_grad();
      backward(loss);
      optimizer.step();
      weighted_loss += loss.item() * double(chunk.size());
    }
    optimizer.zero_grad();
    result.epoch_losses.push_back(weighted_loss / double(n));
  }
  return result;
}

std::vector<int> predict(EncoderModel& model, const Scene& scene,
                         std::span<const LabeledPixel> pixels, std::size_t batch_size) {
  check_model_matches(model, scene);
  if (!model.has_head()) throw ConfigError("no linear head attached");
  if (batch_size == 0) batch_size = 256;
  NoGradGuard no_grad;
  std::vector<int> out;
  out.reserve(pixels.size());
  const std::size_t classes = model.num_classes();
  for (std::size_t start = 0; start < pixels.size(); start += batch_size) {
    const auto chunk = pixels.subspan(start, std::min(batch_size, pixels.size() - start));
    const auto logits = model.forward_classifier(batch_for(scene, chunk, model.encoder_config()),
                                                 false);
    const auto data = logits.data();
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto row = data.subspan(i * classes, classes);
      // max_element keeps the first maximum, so ties go to the lowest index.
      out.push_back(int(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  return out;
}

std::vector<int> predict_scene(EncoderModel& model, const Scene& scene, std::size_t batch_size) {
  std::vector<LabeledPixel> all;
  all.reserve(scene.pixel_count());
  for (std::size_t r = 0; r < scene.height; ++r) {
    for (std::size_t c = 0; c < scene.width; ++c) all.push_back({r, c, 0});
  }
  return predict(model, scene, all, batch_size);
}

MetricsReport evaluate(EncoderModel& model, const Scene& scene, const FewShotSplit& split) {
  if (split.test.empty()) throw ConfigError("few-shot split has no test pixels");
  const auto predicted = predict(model, scene, split.test);
  ConfusionMatrix confusion(std::max(split.num_classes, model.num_classes()));
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    confusion.add(split.test[i].label, predicted[i]);
  }
  auto report = make_report(confusion);
  report.n_train = split.train.size();
  report.seed = split.seed;
  return report;
}

}  // namespace hsissl
