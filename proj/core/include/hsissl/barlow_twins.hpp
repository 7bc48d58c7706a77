#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hsissl/models.hpp"
#include "hsissl/scene.hpp"
#include "hsissl/tensor.hpp"
#include "hsissl/views.hpp"

namespace hsissl {

struct CorrelationOptions {
  /// Subtract the batch mean of every column first, making the entries
  /// Pearson correlations. Off reproduces the raw normalized inner product.
  bool center = true;
  /// Added under each square root of the denominator.
  double eps = 1e-12;
};

/// D x D matrix C[i][j] = <a_i, b_j> / (|a_i| |b_j|) between column i of
/// Z_a and column j of Z_b, both [batch x D], taken along the batch axis.
/// Throws DegenerateBatchError for batch < 2.
template <typename T>
BasicTensor<T> cross_correlation(const BasicTensor<T>& z_a, const BasicTensor<T>& z_b,
                                 CorrelationOptions options = {});

/// sum_i (1 - C_ii)^2 + lambda * sum_{i != j} C_ij^2.
template <typename T>
BasicTensor<T> barlow_twins_loss(const BasicTensor<T>& correlation, double lambda);

/// Mean |C_ij| over off-diagonal entries.
double mean_abs_off_diagonal(const Tensor& correlation);

struct BarlowTwinsConfig {
  double lambda = 0.005;
  std::size_t batch_size = 256;
  std::size_t epochs = 100;
  double base_lr = 0.2;
  double weight_decay = 1.5e-6;
  double momentum = 0.9;
  double lars_trust_coefficient = 0.001;
  double lars_eps = 1e-8;
  double warmup_epochs = 2.0;
  bool center = true;
  /// Abort when an epoch's mean loss exceeds this multiple of the first.
  double divergence_factor = 10.0;

  void validate() const;
};

struct PretrainResult {
  std::vector<double> epoch_losses;  // mean batch loss per epoch
  std::size_t batches_per_epoch = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Barlow-Twins pre-training of `model` (encoder + projector) on every pixel
/// of `scene`, treated as unlabeled. Each epoch visits all pixels once in a
/// shuffled order, dropping the last incomplete batch. Deterministic for a
/// given seed. Throws NumericalError on divergence or non-finite values.
PretrainResult pretrain(const Scene& scene, EncoderModel& model,
                        const PairSamplingPolicy& policy, const AugmentationSpec& spec_a,
                        const AugmentationSpec& spec_b, const BarlowTwinsConfig& config,
                        std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Views for the given centres, drawn with one RNG in order.
std::vector<ViewPair> make_view_batch(const Scene& scene,
                                      std::span<const std::size_t> pixel_indices,
                                      std::size_t patch_size, const PairSamplingPolicy& policy,
                                      const AugmentationSpec& spec_a,
                                      const AugmentationSpec& spec_b, Rng& rng);

/// Cross-correlation of the projector outputs for a batch of view pairs,
/// computed on a throwaway copy of the model with batch statistics so the
/// model itself (including its running statistics) is untouched.
Tensor probe_cross_correlation(const EncoderModel& model, std::span<const ViewPair> views,
                               bool center = true);

/// "epoch,mean_loss" CSV, epochs numbered from 1.
std::string loss_history_csv(std::span<const double> epoch_losses);

}  // namespace hsissl
