#include "hsissl/models.hpp"

#include <cmath>

#include "hsissl/error.hpp"
#include "hsissl/rng.hpp"

namespace hsissl {
namespace {

ConvLayer make_conv(EncoderKind kind, std::size_t in, std::size_t out, std::size_t kernel) {
  ConvLayer layer;
  layer.kind = kind;
  layer.padding = kernel / 2;
  const Shape shape = kind == EncoderKind::conv2d ? Shape{out, in, kernel, kernel}
                                                  : Shape{out, in, kernel};
  layer.weight = Tensor::zeros(shape, true);
  return layer;
}

LinearLayer make_linear(std::size_t in, std::size_t out) {
  return {Tensor::zeros({in, out}, true), Tensor::zeros({out}, true)};
}

void he_normal(Tensor& weight, std::size_t fan_in, Rng& rng) {
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : weight.mutable_data()) v = static_cast<float>(sd * standard_normal(rng));
}

void reset_bn(BatchNormLayer& bn) {
  for (auto& v : bn.gamma.mutable_data()) v = 1.0f;
  for (auto& v : bn.beta.mutable_data()) v = 0.0f;
  bn.stats = RunningStats<float>::identity(bn.gamma.numel());
}

void init_conv(ConvLayer& conv, Rng& rng) {
  he_normal(conv.weight, conv.weight.numel() / conv.weight.dim(0), rng);
}

void init_linear(LinearLayer& linear, Rng& rng) {
  he_normal(linear.weight, linear.weight.dim(0), rng);
  for (auto& v : linear.bias.mutable_data()) v = 0.0f;
}

void add_conv(std::vector<NamedParameter>& out, const std::string& name, const ConvLayer& c) {
  out.push_back({name + ".weight", c.weight, false});
}

void add_bn(std::vector<NamedParameter>& out, const std::string& name, const BatchNormLayer& bn) {
  out.push_back({name + ".gamma", bn.gamma, true});
  out.push_back({name + ".beta", bn.beta, true});
}

void add_linear(std::vector<NamedParameter>& out, const std::string& name,
                const LinearLayer& l) {
  out.push_back({name + ".weight", l.weight, false});
  out.push_back({name + ".bias", l.bias, true});
}

void add_buffers(std::vector<NamedBuffer>& out, const std::string& name, BatchNormLayer& bn) {
  out.push_back({name + ".running_mean", &bn.stats.mean});
  out.push_back({name + ".running_var", &bn.stats.var});
}

void add_block_parameters(std::vector<NamedParameter>& out, const std::string& name,
                          const ResidualBlock& block) {
  add_conv(out, name + ".conv1", block.conv1);
  add_bn(out, name + ".bn1", block.bn1);
  add_conv(out, name + ".conv2", block.conv2);
  add_bn(out, name + ".bn2", block.bn2);
  if (block.shortcut) {
    add_conv(out, name + ".shortcut", *block.shortcut);
    add_bn(out, name + ".shortcut_bn", *block.shortcut_bn);
  }
}

void add_block_buffers(std::vector<NamedBuffer>& out, const std::string& name,
                       ResidualBlock& block) {
  add_buffers(out, name + ".bn1", block.bn1);
  add_buffers(out, name + ".bn2", block.bn2);
  if (block.shortcut_bn) add_buffers(out, name + ".shortcut_bn", *block.shortcut_bn);
}

ResidualBlock make_block(EncoderKind kind, std::size_t in, std::size_t out,
                         std::size_t kernel) {
  ResidualBlock block;
  block.conv1 = make_conv(kind, in, out, kernel);
  block.bn1 = BatchNormLayer(out);
  block.conv2 = make_conv(kind, out, out, kernel);
  block.bn2 = BatchNormLayer(out);
  if (in != out) {
    block.shortcut = make_conv(kind, in, out, 1);
    block.shortcut_bn = BatchNormLayer(out);
  }
  return block;
}

void init_block(ResidualBlock& block, Rng& rng) {
  init_conv(block.conv1, rng);
  reset_bn(block.bn1);
  init_conv(block.conv2, rng);
  reset_bn(block.bn2);
  if (block.shortcut) {
    init_conv(*block.shortcut, rng);
    reset_bn(*block.shortcut_bn);
  }
}

}  // namespace

std::string_view encoder_kind_name(EncoderKind kind) {
  return kind == EncoderKind::conv1d ? "conv1d" : "conv2d";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "conv1d") return EncoderKind::conv1d;
  if (name == "conv2d") return EncoderKind::conv2d;
  throw ConfigError("unknown encoder kind '" + std::string(name) + "'");
}

void EncoderConfig::validate() const {
  if (input_bands == 0) throw ConfigError("encoder input_bands must be positive");
  if (widths.size() != 2) {
    throw ConfigError("encoder has exactly 2 residual blocks; widths needs 2 entries");
  }
  for (auto w : widths) {
    if (w == 0) throw ConfigError("encoder widths must be positive");
  }
  if (embedding_dim == 0) throw ConfigError("embedding_dim must be positive");
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    throw ConfigError("kernel_size must be odd");
  }
  if (kind == EncoderKind::conv2d) {
    if (patch_size == 0 || patch_size % 2 == 0) throw ConfigError("patch_size must be odd");
    if (patch_size != 1 && patch_size < kernel_size) {
      throw ConfigError("patch_size " + std::to_string(patch_size) +
                        " is smaller than the kernel extent " + std::to_string(kernel_size));
    }
  } else if (input_bands < kernel_size) {
    throw ConfigError("spectrum of " + std::to_string(input_bands) +
                      " bands is shorter than the kernel extent " +
                      std::to_string(kernel_size));
  }
}

void ProjectionHeadConfig::validate() const {
  if (hidden_dims.empty()) throw ConfigError("projection head needs at least one hidden layer");
  for (auto d : hidden_dims) {
    if (d == 0) throw ConfigError("projection hidden dims must be positive");
  }
  if (output_dim == 0) throw ConfigError("projection output_dim must be positive");
}

Tensor ConvLayer::forward(const Tensor& x) const {
  const ConvOptions options{1, padding};
  return kind == EncoderKind::conv2d ? conv2d(x, weight, options)
                                     : conv1d(x, weight, options);
}

BatchNormLayer::BatchNormLayer(std::size_t channels) {
  if (channels == 0) return;
  gamma = Tensor::full({channels}, 1.0f, true);
  beta = Tensor::zeros({channels}, true);
  stats = RunningStats<float>::identity(channels);
}

Tensor BatchNormLayer::forward(const Tensor& x, bool training) {
  return batch_norm(x, gamma, beta, &stats, BatchNormOptions{training, 0.1, 1e-5});
}

Tensor LinearLayer::forward(const Tensor& x) const {
  return add_bias(matmul(x, weight), bias);
}

Tensor ResidualBlock::forward(const Tensor& x, bool training) {
  auto y = relu(bn1.forward(conv1.forward(x), training));
  y = bn2.forward(conv2.forward(y), training);
  auto skip = shortcut ? shortcut_bn->forward(shortcut->forward(x), training) : x;
  return relu(add(y, skip));
}

EncoderModel::EncoderModel(const EncoderConfig& encoder,
                           const ProjectionHeadConfig& projector, std::uint64_t seed)
    : encoder_config_(encoder), projector_config_(projector) {
  encoder_config_.validate();
  projector_config_.validate();
  build(seed);
}

void EncoderModel::build(std::uint64_t seed) {
  const auto& ec = encoder_config_;
  const std::size_t in_channels = ec.kind == EncoderKind::conv2d ? ec.input_bands : 1;
  stem_ = make_conv(ec.kind, in_channels, ec.widths[0], ec.kernel_size);
  stem_bn_ = BatchNormLayer(ec.widths[0]);
  block1_ = make_block(ec.kind, ec.widths[0], ec.widths[0], ec.kernel_size);
  block2_ = make_block(ec.kind, ec.widths[0], ec.widths[1], ec.kernel_size);
  if (ec.widths[1] != ec.embedding_dim) embed_ = make_linear(ec.widths[1], ec.embedding_dim);

  std::size_t prev = ec.embedding_dim;
  for (auto d : projector_config_.hidden_dims) {
    projector_hidden_.push_back(make_linear(prev, d));
    projector_bn_.emplace_back(d);
    prev = d;
  }
  projector_out_ = make_linear(prev, projector_config_.output_dim);
  reinitialize(seed);
}

void EncoderModel::reinitialize(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "model/init"));
  init_conv(stem_, rng);
  reset_bn(stem_bn_);
  init_block(block1_, rng);
  init_block(block2_, rng);
  if (embed_) init_linear(*embed_, rng);
  for (std::size_t i = 0; i < projector_hidden_.size(); ++i) {
    init_linear(projector_hidden_[i], rng);
    reset_bn(projector_bn_[i]);
  }
  init_linear(projector_out_, rng);
  if (head_) {
    for (auto& v : head_->weight.mutable_data()) v = 0.0f;
    for (auto& v : head_->bias.mutable_data()) v = 0.0f;
  }
}

EncoderModel EncoderModel::clone() const {
  auto& self = const_cast<EncoderModel&>(*this);
  EncoderModel copy(encoder_config_, projector_config_, 0);
  if (head_) copy.attach_linear_head(head_->bias.numel());
  auto src = self.parameters();
  auto dst = copy.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto values = src[i].tensor.data();
    std::copy(values.begin(), values.end(), dst[i].tensor.mutable_data().begin());
  }
  auto src_buffers = self.buffers();
  auto dst_buffers = copy.buffers();
  for (std::size_t i = 0; i < src_buffers.size(); ++i) {
    *dst_buffers[i].values = *src_buffers[i].values;
  }
  copy.set_frozen(frozen_);
  return copy;
}

Tensor EncoderModel::forward_encoder(const Tensor& batch, bool training) {
  const auto& ec = encoder_config_;
  const bool bn_training = training && !frozen_;
  const std::size_t p = ec.input_patch_size();
  const bool shape_ok =
      ec.kind == EncoderKind::conv2d
          ? batch.rank() == 4 && batch.dim(1) == ec.input_bands && batch.dim(2) == p &&
                batch.dim(3) == p
          : batch.rank() == 3 && batch.dim(1) == 1 && batch.dim(2) == ec.input_bands;
  if (!shape_ok) {
    throw DimensionError("encoder input " + shape_string(batch.shape()) +
                         " does not match the configured " +
                         std::string(encoder_kind_name(ec.kind)) + " layout");
  }
  auto x = relu(stem_bn_.forward(stem_.forward(batch), bn_training));
  x = block1_.forward(x, bn_training);
  x = block2_.forward(x, bn_training);
  x = global_average_pool(x);
  if (embed_) x = embed_->forward(x);
  return x;
}

Tensor EncoderModel::forward_projector(const Tensor& embeddings, bool training) {
  auto z = embeddings;
  for (std::size_t i = 0; i < projector_hidden_.size(); ++i) {
    z = relu(projector_bn_[i].forward(projector_hidden_[i].forward(z), training));
  }
  return projector_out_.forward(z);
}

Tensor EncoderModel::forward_classifier(const Tensor& batch, bool encoder_training) {
  if (!head_) throw ConfigError("no linear head attached");
  return head_->forward(forward_encoder(batch, encoder_training));
}

void EncoderModel::attach_linear_head(std::size_t num_classes) {
  if (num_classes < 2) throw ConfigError("a classifier needs at least 2 classes");
  head_ = make_linear(encoder_config_.embedding_dim, num_classes);
}

std::size_t EncoderModel::num_classes() const {
  return head_ ? head_->bias.numel() : 0;
}

void EncoderModel::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (auto& p : encoder_parameters()) {
    p.tensor.set_requires_grad(!frozen);
    if (frozen) p.tensor.zero_grad();
  }
}

std::vector<NamedParameter> EncoderModel::encoder_parameters() {
  std::vector<NamedParameter> out;
  add_conv(out, "encoder.stem", stem_);
  add_bn(out, "encoder.stem_bn", stem_bn_);
  add_block_parameters(out, "encoder.block1", block1_);
  add_block_parameters(out, "encoder.block2", block2_);
  if (embed_) add_linear(out, "encoder.embed", *embed_);
  return out;
}

std::vector<NamedParameter> EncoderModel::projector_parameters() {
  std::vector<NamedParameter> out;
  for (std::size_t i = 0; i < projector_hidden_.size(); ++i) {
    const auto name = "projector.hidden" + std::to_string(i);
    add_linear(out, name, projector_hidden_[i]);
    add_bn(out, name + "_bn", projector_bn_[i]);
  }
  add_linear(out, "projector.out", projector_out_);
  return out;
}

std::vector<NamedParameter> EncoderModel::head_parameters() {
  std::vector<NamedParameter> out;
  if (head_) add_linear(out, "head", *head_);
  return out;
}

std::vector<NamedParameter> EncoderModel::parameters() {
  auto out = encoder_parameters();
  for (auto& p : projector_parameters()) out.push_back(std::move(p));
  for (auto& p : head_parameters()) out.push_back(std::move(p));
  return out;
}

std::vector<NamedBuffer> EncoderModel::buffers() {
  std::vector<NamedBuffer> out;
  add_buffers(out, "encoder.stem_bn", stem_bn_);
  add_block_buffers(out, "encoder.block1", block1_);
  add_block_buffers(out, "encoder.block2", block2_);
  for (std::size_t i = 0; i < projector_bn_.size(); ++i) {
    add_buffers(out, "projector.hidden" + std::to_string(i) + "_bn", projector_bn_[i]);
  }
  return out;
}

std::size_t EncoderModel::encoder_parameter_count() {
  std::size_t n = 0;
  for (const auto& p : encoder_parameters()) n += p.tensor.numel();
  return n;
}

Tensor make_input_batch(std::span<const Tensor> patches, const EncoderConfig& config) {
  if (patches.empty()) throw DimensionError("empty batch");
  const std::size_t batch = patches.size();
  const std::size_t c = config.input_bands;
  if (config.kind == EncoderKind::conv1d) {
    std::vector<float> out(batch * c);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& patch = patches[b];
      if (patch.rank() != 3 || patch.dim(2) != c || patch.dim(0) % 2 == 0) {
        throw DimensionError("patch " + shape_string(patch.shape()) +
                             " does not carry " + std::to_string(c) + " bands");
      }
      const std::size_t p = patch.dim(0);
      const std::size_t centre = (p / 2) * p + p / 2;
      const auto src = patch.data().subspan(centre * c, c);
      std::copy(src.begin(), src.end(), out.begin() + b * c);
    }
    return Tensor({batch, 1, c}, std::move(out));
  }
  const std::size_t p = config.patch_size;
  std::vector<float> out(batch * c * p * p);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& patch = patches[b];
    if (patch.shape() != Shape{p, p, c}) {
      throw DimensionError("patch " + shape_string(patch.shape()) + " does not match " +
                           shape_string({p, p, c}));
    }
    const auto src = patch.data();
    float* dst = out.data() + b * c * p * p;
    for (std::size_t i = 0; i < p * p; ++i) {
      for (std::size_t k = 0; k < c; ++k) dst[k * p * p + i] = src[i * c + k];
    }
  }
  return Tensor({batch, c, p, p}, std::move(out));
}

}  // namespace hsissl
