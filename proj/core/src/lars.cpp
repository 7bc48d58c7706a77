#include "hsissl/lars.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hsissl/error.hpp"

namespace hsissl {

double lars_learning_rate(const LarsOptions& options, double epoch_progress) {
  const double warmup = options.warmup_epochs;
  if (warmup > 0.0 && epoch_progress < warmup) {
    return options.base_lr * std::max(0.0, epoch_progress) / warmup;
  }
  const double span = options.total_epochs - warmup;
  if (span <= 0.0) return options.base_lr;
  const double t = std::min(1.0, (epoch_progress - warmup) / span);
  return options.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

double lars_local_lr(double weight_norm, double grad_norm, double weight_decay,
                     double trust_coefficient, double eps) {
  if (weight_norm > 0.0 && grad_norm > 0.0) {
    return trust_coefficient * weight_norm / (grad_norm + weight_decay * weight_norm + eps);
  }
  return 1.0;
}

Lars::Lars(std::vector<NamedParameter> parameters, LarsOptions options)
    : parameters_(std::move(parameters)), options_(options) {
  velocity_.reserve(parameters_.size());
  for (const auto& p : parameters_) velocity_.emplace_back(p.tensor.numel(), 0.0f);
}

void Lars::step(double epoch_progress) {
  const double lr = lars_learning_rate(options_, epoch_progress);
  for (std::size_t i = 0; i < parameters_.size(); ++i) {
    auto& param = parameters_[i];
    if (!param.tensor.requires_grad() || !param.tensor.has_grad()) continue;
    auto w = param.tensor.mutable_data();
    const auto g = param.tensor.grad();

    double w_sq = 0.0, g_sq = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (!std::isfinite(g[k])) {
        throw NumericalError("non-finite gradient in " + param.name + " at index " +
                             std::to_string(k));
      }
      w_sq += double(w[k]) * w[k];
      g_sq += double(g[k]) * g[k];
    }

    double wd = options_.weight_decay;
    double local = 1.0;
    if (param.exclude_from_adaptation) {
      wd = 0.0;
    } else {
      local = lars_local_lr(std::sqrt(w_sq), std::sqrt(g_sq), wd,
                            options_.trust_coefficient, options_.eps);
    }

    auto& v = velocity_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double update = local * (double(g[k]) + wd * w[k]);
      v[k] = static_cast<float>(options_.momentum * v[k] + update);
      w[k] = static_cast<float>(w[k] - lr * v[k]);
    }
  }
}

void Lars::zero_grad() {
  for (auto& p : parameters_) p.tensor.zero_grad();
}

}  // namespace hsissl
