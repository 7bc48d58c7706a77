#pragma once

#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

#include "hsissl/tensor.hpp"

namespace hsissl {

struct ConvOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;  // zero padding on every spatial side
};

/// Per-channel running estimates maintained by batch_norm in training mode.
template <typename T>
struct RunningStats {
  std::vector<T> mean;
  std::vector<T> var;

  static RunningStats identity(std::size_t channels) {
    return {std::vector<T>(channels, T(0)), std::vector<T>(channels, T(1))};
  }
};

struct BatchNormOptions {
  bool training = true;
  double momentum = 0.1;
  double eps = 1e-5;
};

// Every op below throws DimensionError on incompatible shapes and
// NumericalError if the forward result is not finite.

/// [m x k] * [k x n] -> [m x n].
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Elementwise sum of equal shapes.
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// x[B x F] + bias[F], broadcast over rows.
template <typename T>
BasicTensor<T> add_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias);

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T alpha);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

/// Sum of all elements as a [1] tensor.
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

/// [B x ...] -> [B x rest].
template <typename T>
BasicTensor<T> flatten(const BasicTensor<T>& x);

/// Cross-correlation (no kernel flip) of [B x Cin x H x W] with
/// [Cout x Cin x KH x KW]; output extent (H + 2p - KH) / stride + 1.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      ConvOptions options = {});

/// [B x Cin x L] with [Cout x Cin x KL].
template <typename T>
BasicTensor<T> conv1d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      ConvOptions options = {});

/// Normalizes axis 1 of a [B x C x ...] tensor over the batch and any
/// trailing axes, then applies gamma/beta. In training mode batch statistics
/// are used and `stats` (when given) is updated with the unbiased variance;
/// otherwise `stats` must be given and is used as-is.
template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& input,
                          const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta,
                          std::type_identity_t<RunningStats<T>>* stats,
                          BatchNormOptions options);

/// [B x C x ...] -> [B x C], mean over trailing axes.
template <typename T>
BasicTensor<T> global_average_pool(const BasicTensor<T>& x);

/// Mean cross-entropy of softmax(logits) against integer labels.
/// Throws LabelError for labels outside [0, G).
template <typename T>
BasicTensor<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                     std::span<const int> labels);

}  // namespace hsissl
