#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsissl/models.hpp"
#include "hsissl/scene.hpp"

namespace hsissl {

enum class Protocol { linear, finetune, supervised_baseline };

std::string_view protocol_name(Protocol protocol);
Protocol parse_protocol(std::string_view name);

struct TrainConfig {
  Protocol protocol = Protocol::linear;
  std::size_t epochs = 100;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  /// Encoder learning rate multiplier under the finetune protocol.
  double finetune_encoder_lr_scale = 0.1;
  /// Mini-batch size; 0 trains on the whole few-shot set at every step.
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  std::vector<double> epoch_losses;  // mean cross-entropy per epoch
  std::size_t examples_per_epoch = 0;
  std::size_t steps_per_epoch = 0;
};

/// Trains the linear head (attaching a fresh zero-initialized one) on the
/// split's training pixels with SGD and cross-entropy.
///   linear: encoder frozen, only the head moves.
///   finetune: everything moves; encoder group at lr * finetune_encoder_lr_scale,
///     encoder batch norm kept on its running statistics.
///   supervised_baseline: encoder re-initialized from the seed, everything moves
///     at lr with batch-statistics batch norm.
/// The projector is never trained here. Throws ConfigError when the model
/// does not match the scene.
TrainResult train_classifier(EncoderModel& model, const Scene& scene, const FewShotSplit& split,
                             const TrainConfig& config);

/// Argmax class per pixel, lowest index on ties. Evaluation mode, no graph.
std::vector<int> predict(EncoderModel& model, const Scene& scene,
                         std::span<const LabeledPixel> pixels, std::size_t batch_size = 256);
/// Predictions for every pixel in raster order.
std::vector<int> predict_scene(EncoderModel& model, const Scene& scene,
                               std::size_t batch_size = 256);

/// G x G counts, rows = ground truth, columns = prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  void add(int truth, int predicted, std::uint64_t count = 1);

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * classes_ + predicted];
  }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t col_sum(std::size_t predicted) const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

/// trace / total. Throws ConfigError on an empty matrix.
double overall_accuracy(const ConfusionMatrix& confusion);
/// sum_k rowsum_k * colsum_k / total^2.
double chance_agreement(const ConfusionMatrix& confusion);
/// (p_o - p_e) / (1 - p_e). When p_e == 1 returns 0 and, if given, fills
/// `warning`. Throws ConfigError on an empty matrix.
double cohen_kappa(const ConfusionMatrix& confusion, std::string* warning = nullptr);

struct MetricsReport {
  ConfusionMatrix confusion{2};
  double overall_accuracy = 0.0;
  double kappa = 0.0;
  std::vector<double> per_class_accuracy;  // NaN for classes absent from the test set
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
  std::string protocol;
  std::vector<std::string> warnings;

  /// {oa, kappa, per_class, confusion, n_train, n_test, seed, protocol};
  /// absent classes serialize as null.
  std::string to_json() const;
};

MetricsReport make_report(const ConfusionMatrix& confusion);

/// Metrics over the split's test pixels only.
MetricsReport evaluate(EncoderModel& model, const Scene& scene, const FewShotSplit& split);

/// Binary 8-bit PGM of a label raster. Label k >= 0 maps to gray level
/// round(255 * (k + 1) / classes); negative labels (unlabeled) map to 0.
void write_label_pgm(const std::filesystem::path& path, std::size_t height, std::size_t width,
                     std::span<const int> labels, std::size_t classes);

}  // namespace hsissl
