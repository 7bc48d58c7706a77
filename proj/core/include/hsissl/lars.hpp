#pragma once

#include <cstddef>
#include <vector>

#include "hsissl/models.hpp"

namespace hsissl {

struct LarsOptions {
  double base_lr = 0.2;
  double weight_decay = 1.5e-6;
  double momentum = 0.9;
  double trust_coefficient = 0.001;
  double eps = 1e-8;
  double warmup_epochs = 2.0;
  double total_epochs = 100.0;
};

/// Global learning rate at a (fractional) epoch: linear warmup from zero,
/// then half-cosine decay to zero at total_epochs.
double lars_learning_rate(const LarsOptions& options, double epoch_progress);

/// trust * |w| / (|g| + wd * |w| + eps), or 1 when either norm is zero.
double lars_local_lr(double weight_norm, double grad_norm, double weight_decay,
                     double trust_coefficient, double eps);

/// Layer-wise adaptive rate scaling with heavy-ball momentum. Parameters
/// flagged exclude_from_adaptation get neither weight decay nor the trust
/// ratio. Per parameter:
///   v <- momentum * v + local_lr * (g + wd * w)
///   w <- w - lr(t) * v
class Lars {
 public:
  Lars(std::vector<NamedParameter> parameters, LarsOptions options);

  /// Applies one update from the gradients currently stored on the
  /// parameters. Throws NumericalError naming the first non-finite gradient.
  void step(double epoch_progress);
  void zero_grad();

  const LarsOptions& options() const { return options_; }

 private:
  std::vector<NamedParameter> parameters_;
  std::vector<std::vector<float>> velocity_;
  LarsOptions options_;
};

}  // namespace hsissl
