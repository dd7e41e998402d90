#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "flowda/numerics/ops.hpp"

namespace flowda {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // 0 checks every coordinate; otherwise a seeded random subset per tensor.
  std::size_t max_coordinates_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
  bool passed = true;
};

/**
 * Compares reverse-mode gradients of a scalar function against central
 * differences.
 *
 * `inputs` are handles to tensors the function reads (typically captured
 * parameters); they are perturbed in place and restored. The error per
 * coordinate is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
 */
inline GradCheckResult grad_check(const std::function<Tensor()>& function, std::vector<Tensor> inputs,
                                  const GradCheckOptions& options = {}) {
  std::vector<bool> saved_flags;
  for (auto& t : inputs) {
    saved_flags.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
  }

  std::vector<std::vector<double>> analytic;
  {
    GradientTape tape;
    Tensor loss = function();
    tape.backward(loss);
  }
  for (auto& t : inputs) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
    t.zero_grad();
  }

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_data();
    std::vector<std::size_t> coords(values.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coordinates_per_tensor != 0 && coords.size() > options.max_coordinates_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coordinates_per_tensor);
    }
    for (auto i : coords) {
      const double original = values[i];
      values[i] = original + options.step;
      const double plus = function().item();
      values[i] = original - options.step;
      const double minus = function().item();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++result.coordinates_checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_tensor = k;
        result.worst_index = i;
      }
    }
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) inputs[k].set_requires_grad(saved_flags[k]);
  result.passed = result.max_relative_error < options.tolerance;
  return result;
}

}  // namespace flowda
