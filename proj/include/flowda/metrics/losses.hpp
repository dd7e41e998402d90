#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "flowda/numerics/ops.hpp"

namespace flowda {

/**
 * Variance-normalized squared error, the differentiable NSE surrogate used to
 * train the generators:
 *
 *   L = (1/B) * sum_b sum_t mask[b,t] * (pred[b,t] - obs[b,t])^2 / (var_b + eps)
 *
 * `predicted` and `observed` are [B x tau]; `mask` (same shape, 1 = observed)
 * and `basin_variance` (length B) are constants.
 */
inline Tensor nse_loss(const Tensor& predicted, const Tensor& observed, const Tensor& mask,
                       std::span<const double> basin_variance, double epsilon = 0.1) {
  if (predicted.shape() != observed.shape() || mask.shape() != predicted.shape() || predicted.rank() != 2) {
    throw DimensionError("nse_loss: predicted " + shape_string(predicted.shape()) + ", observed " +
                         shape_string(observed.shape()) + ", mask " + shape_string(mask.shape()));
  }
  const std::size_t batch = predicted.dim(0), horizon = predicted.dim(1);
  if (basin_variance.size() != batch) throw DimensionError("nse_loss: one basin variance per row is required");
  if (!(epsilon > 0.0)) throw std::invalid_argument("nse_loss: epsilon must be positive");
  std::vector<double> weights(batch * horizon);
  for (std::size_t b = 0; b < batch; ++b) {
    if (basin_variance[b] < 0.0) throw std::invalid_argument("nse_loss: negative basin variance");
    const double w = 1.0 / ((basin_variance[b] + epsilon) * static_cast<double>(batch));
    for (std::size_t t = 0; t < horizon; ++t) weights[b * horizon + t] = w * mask[b * horizon + t];
  }
  auto diff = sub(predicted, observed);
  return sum(mul(mul(diff, diff), Tensor(predicted.shape(), std::move(weights))));
}

/// Mean binary cross-entropy from probabilities; computed through logits so
/// p near 0 or 1 stays finite. Non-differentiable convenience form.
inline double binary_cross_entropy(std::span<const double> probabilities, std::span<const double> labels) {
  if (probabilities.size() != labels.size() || probabilities.empty()) {
    throw DimensionError("binary_cross_entropy: probabilities and labels must be non-empty and equal length");
  }
  std::vector<double> logits(probabilities.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = probabilities[i];
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("binary_cross_entropy: probability outside (0, 1)");
    logits[i] = std::log(p) - std::log1p(-p);
  }
  return bce_with_logits(Tensor::vector(std::move(logits)), Tensor::vector({labels.begin(), labels.end()})).item();
}

}  // namespace flowda
