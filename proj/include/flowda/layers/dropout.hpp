#pragma once

#include <random>
#include <stdexcept>

#include "flowda/layers/init.hpp"
#include "flowda/numerics/ops.hpp"

namespace flowda {

enum class ForwardMode { kTrain, kEval };

struct DropoutSpec {
  double rate = 0.0;
  ForwardMode mode = ForwardMode::kEval;

  void validate() const {
    if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
};

/// Inverted dropout: survivors are scaled by 1 / (1 - rate). Identity in eval mode.
inline Tensor dropout(const DropoutSpec& spec, const Tensor& x, Rng& rng) {
  spec.validate();
  if (spec.mode == ForwardMode::kEval || spec.rate == 0.0) return x;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - spec.rate);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = uniform(rng) < spec.rate ? 0.0 : keep_scale;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

}  // namespace flowda
