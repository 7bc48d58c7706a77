#include <future>
#include <numeric>
#include <sstream>

#include "hsissl/barlow_twins.hpp"
#include "hsissl/error.hpp"
#include "hsissl/lars.hpp"
#include "hsissl/rng.hpp"

namespace hsissl {
namespace {

struct ViewBatch {
  Tensor inputs_a;
  Tensor inputs_b;
};

ViewBatch pack(std::span<const ViewPair> views, const EncoderConfig& config) {
  std::vector<Tensor> a, b;
  a.reserve(views.size());
  b.reserve(views.size());
  for (const auto& v : views) {
    a.push_back(v.view_a);
    b.push_back(v.view_b);
  }
  return {make_input_batch(a, config), make_input_batch(b, config)};
}

}  // namespace

void BarlowTwinsConfig::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (!(base_lr >= 0.0)) throw ConfigError("base_lr must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(lars_trust_coefficient > 0.0)) throw ConfigError("lars_trust_coefficient must be > 0");
  if (!(lars_eps >= 0.0)) throw ConfigError("lars_eps must be >= 0");
  if (!(warmup_epochs >= 0.0)) throw ConfigError("warmup_epochs must be >= 0");
  if (!(divergence_factor > 1.0)) throw ConfigError("divergence_factor must be > 1");
}

std::vector<ViewPair> make_view_batch(const Scene& scene,
                                      std::span<const std::size_t> pixel_indices,
                                      std::size_t patch_size, const PairSamplingPolicy& policy,
                                      const AugmentationSpec& spec_a,
                                      const AugmentationSpec& spec_b, Rng& rng) {
  std::vector<ViewPair> views;
  views.reserve(pixel_indices.size());
  for (const auto index : pixel_indices) {
    views.push_back(make_views(scene, index / scene.width, index % scene.width, patch_size,
                               policy, spec_a, spec_b, rng));
  }
  return views;
}

Tensor probe_cross_correlation(const EncoderModel& model, std::span<const ViewPair> views,
                               bool center) {
  auto probe = model.clone();
  probe.set_frozen(false);
  NoGradGuard no_grad;
  const auto batch = pack(views, probe.encoder_config());
  const auto z_a = probe.forward_projector(probe.forward_encoder(batch.inputs_a, true), true);
  const auto z_b = probe.forward_projector(probe.forward_encoder(batch.inputs_b, true), true);
  return cross_correlation(z_a, z_b, CorrelationOptions{center, 1e-12});
}

PretrainResult pretrain(const Scene& scene, EncoderModel& model,
                        const PairSamplingPolicy& policy, const AugmentationSpec& spec_a,
                        const AugmentationSpec& spec_b, const BarlowTwinsConfig& config,
                        std::uint64_t seed, const EpochCallback& on_epoch) {
  config.validate();
  policy.validate();
  const auto& ec = model.encoder_config();
  if (ec.input_bands != scene.bands) {
    throw ConfigError("model expects " + std::to_string(ec.input_bands) +
                      " bands, scene has " + std::to_string(scene.bands));
  }
  if (model.frozen()) throw ConfigError("cannot pre-train a frozen encoder");

  PretrainResult result;
  const std::size_t pixels = scene.pixel_count();
  result.batches_per_epoch = pixels / config.batch_size;
  if (config.epochs == 0) return result;
  if (result.batches_per_epoch == 0) {
    throw ConfigError("scene has " + std::to_string(pixels) +
                      " pixels, fewer than one batch of " + std::to_string(config.batch_size));
  }

  auto parameters = model.encoder_parameters();
  for (auto& p : model.projector_parameters()) parameters.push_back(std::move(p));
  LarsOptions lars_options;
  lars_options.base_lr = config.base_lr;
  lars_options.weight_decay = config.weight_decay;
  lars_options.momentum = config.momentum;
  lars_options.trust_coefficient = config.lars_trust_coefficient;
  lars_options.eps = config.lars_eps;
  lars_options.warmup_epochs = config.warmup_epochs;
  lars_options.total_epochs = static_cast<double>(config.epochs);
  Lars optimizer(parameters, lars_options);

  const std::size_t patch = ec.input_patch_size();
  const std::size_t batches = result.batches_per_epoch;
  const std::size_t bs = config.batch_size;
  std::vector<std::size_t> order(pixels);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(seed, "pretrain/shuffle", epoch));
    for (std::size_t i = pixels; i > 1; --i) {
      std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);
    }

    // Every batch owns an RNG stream, so generating the next batch while the
    // current one trains does not change any drawn value.
    auto produce = [&](std::size_t b) {
      Rng rng(derive_seed(seed, "pretrain/views", epoch * batches + b));
      const std::span<const std::size_t> ids(order.data() + b * bs, bs);
      const auto views = make_view_batch(scene, ids, patch, policy, spec_a, spec_b, rng);
      return pack(views, ec);
    };

    double loss_sum = 0.0;
    auto next = std::async(std::launch::async, produce, 0);
    for (std::size_t b = 0; b < batches; ++b) {
      const ViewBatch batch = next.get();
      if (b + 1 < batches) next = std::async(std::launch::async, produce, b + 1);

      const auto z_a = model.forward_projector(model.forward_encoder(batch.inputs_a, true), true);
      const auto z_b = model.forward_projector(model.forward_encoder(batch.inputs_b, true), true);
      const auto c = cross_correlation(z_a, z_b, CorrelationOptions{config.center, 1e-12});
      const auto loss = barlow_twins_loss(c, config.lambda);
      optimizer.zero_grad();
      backward(loss);
      optimizer.step(double(epoch) + double(b + 1) / double(batches));
      loss_sum += loss.item();
    }
    optimizer.zero_grad();

    const double mean = loss_sum / double(batches);
    result.epoch_losses.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
    if (mean > config.divergence_factor * result.epoch_losses.front()) {
      std::ostringstream msg;
      msg << "pre-training diverged at epoch " << epoch + 1 << ": mean loss " << mean
          << " exceeds " << config.divergence_factor << "x the first epoch ("
          << result.epoch_losses.front() << ")";
      throw NumericalError(msg.str());
    }
  }
  return result;
}

std::string loss_history_csv(std::span<const double> epoch_losses) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,mean_loss\n";
  for (std::size_t i = 0; i < epoch_losses.size(); ++i) {
    out << i + 1 << ',' << epoch_losses[i] << '\n';
  }
  return out.str();
}

}  // namespace hsissl
