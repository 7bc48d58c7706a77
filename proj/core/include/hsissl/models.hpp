#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsissl/ops.hpp"
#include "hsissl/tensor.hpp"

namespace hsissl {

enum class EncoderKind { conv1d, conv2d };

std::string_view encoder_kind_name(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::conv2d;
  std::size_t input_bands = 0;
  std::size_t patch_size = 9;  // conv2d only; conv1d always reads one pixel
  std::vector<std::size_t> widths{64, 128};  // channels of residual stage 1, 2
  std::size_t embedding_dim = 128;
  std::size_t kernel_size = 3;

  /// Spatial size of the patches this encoder consumes.
  std::size_t input_patch_size() const {
    return kind == EncoderKind::conv1d ? 1 : patch_size;
  }
  void validate() const;
};

struct ProjectionHeadConfig {
  std::vector<std::size_t> hidden_dims{256, 256};
  std::size_t output_dim = 256;

  void validate() const;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
  /// Biases and batch-norm affine terms: no weight decay, no LARS scaling.
  bool exclude_from_adaptation = false;
};

struct NamedBuffer {
  std::string name;
  std::vector<float>* values;
};

struct ConvLayer {
  Tensor weight;
  EncoderKind kind = EncoderKind::conv2d;
  std::size_t padding = 0;

  Tensor forward(const Tensor& x) const;
};

struct BatchNormLayer {
  Tensor gamma;
  Tensor beta;
  RunningStats<float> stats;

  explicit BatchNormLayer(std::size_t channels = 0);
  Tensor forward(const Tensor& x, bool training);
};

struct LinearLayer {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  Tensor forward(const Tensor& x) const;
};

/// conv-BN-ReLU-conv-BN plus an identity or 1x1-conv+BN shortcut, then ReLU.
struct ResidualBlock {
  ConvLayer conv1;
  BatchNormLayer bn1;
  ConvLayer conv2;
  BatchNormLayer bn2;
  std::optional<ConvLayer> shortcut;
  std::optional<BatchNormLayer> shortcut_bn;

  Tensor forward(const Tensor& x, bool training);
};

/// Residual CNN encoder f with its Barlow-Twins projection head and an
/// optional linear classification head l. Layout of the input batch:
/// conv2d [B x C x p x p], conv1d [B x 1 x C].
class EncoderModel {
 public:
  EncoderModel(const EncoderConfig& encoder, const ProjectionHeadConfig& projector,
               std::uint64_t seed);

  EncoderModel(const EncoderModel&) = delete;
  EncoderModel& operator=(const EncoderModel&) = delete;
  EncoderModel(EncoderModel&&) = default;
  EncoderModel& operator=(EncoderModel&&) = default;

  /// Deep copy (parameters, running statistics, head, frozen flag).
  EncoderModel clone() const;

  const EncoderConfig& encoder_config() const { return encoder_config_; }
  const ProjectionHeadConfig& projector_config() const { return projector_config_; }

  /// He-normal weights, zero biases, unit BN scale, identity running stats.
  void reinitialize(std::uint64_t seed);

  /// Embeddings h [B x embedding_dim]. Batch norm uses batch statistics only
  /// when `training` is set and the encoder is not frozen.
  Tensor forward_encoder(const Tensor& batch, bool training);
  /// z [B x output_dim]: (linear-BN-ReLU) per hidden layer, final linear.
  Tensor forward_projector(const Tensor& embeddings, bool training);
  /// Logits of l(f(x)); requires an attached head.
  Tensor forward_classifier(const Tensor& batch, bool encoder_training);

  /// Zero-initialized linear head on h. Throws ConfigError if classes < 2.
  void attach_linear_head(std::size_t num_classes);
  bool has_head() const { return head_.has_value(); }
  std::size_t num_classes() const;

  /// Frozen encoders record no gradients and keep their running statistics.
  void set_frozen(bool frozen);
  bool frozen() const { return frozen_; }

  std::vector<NamedParameter> encoder_parameters();
  std::vector<NamedParameter> projector_parameters();
  std::vector<NamedParameter> head_parameters();
  /// encoder, projector, head in declaration order.
  std::vector<NamedParameter> parameters();
  std::vector<NamedBuffer> buffers();

  std::size_t encoder_parameter_count();

 private:
  void build(std::uint64_t seed);

  EncoderConfig encoder_config_;
  ProjectionHeadConfig projector_config_;

  ConvLayer stem_;
  BatchNormLayer stem_bn_;
  ResidualBlock block1_;
  ResidualBlock block2_;
  std::optional<LinearLayer> embed_;

  std::vector<LinearLayer> projector_hidden_;
  std::vector<BatchNormLayer> projector_bn_;
  LinearLayer projector_out_;

  std::optional<LinearLayer> head_;
  bool frozen_ = false;
};

/// Packs [p x p x C] patches into the layout the encoder expects. conv1d
/// encoders read the centre pixel of each patch.
Tensor make_input_batch(std::span<const Tensor> patches, const EncoderConfig& config);

struct Checkpoint {
  EncoderModel model;
  std::map<std::string, std::string> metadata;
};

/// Text header (configuration as key=value lines) followed by the
/// little-endian float32 parameters and running statistics in declaration
/// order. Reloading reproduces every value bit for bit.
void save_checkpoint(EncoderModel& model, const std::filesystem::path& path,
                     const std::map<std::string, std::string>& metadata = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hsissl
