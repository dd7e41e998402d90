#pragma once

#include <cmath>
#include <random>

#include "flowda/numerics/tensor.hpp"

namespace flowda {

using Rng = std::mt19937_64;

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> values(fan_out * fan_in);
  for (auto& v : values) v = dist(rng);
  return Tensor({fan_out, fan_in}, std::move(values), true);
}

inline Tensor zero_parameter(Shape shape) { return Tensor::zeros(std::move(shape), true); }

}  // namespace flowda
