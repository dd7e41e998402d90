#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/layers/mlp.hpp"
#include "flowda/numerics/tensor.hpp"

namespace flowda {

/// Training produced a non-finite loss or gradient.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 0.001 for the first epoch, 0.0005 afterwards (epochs count from 1).
inline double lr_schedule(std::size_t epoch, double first = 0.001, double rest = 0.0005) {
  if (epoch < 1) throw std::invalid_argument("lr_schedule: epochs count from 1");
  return epoch == 1 ? first : rest;
}

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/**
 * One bias-corrected Adam update. `grads[i]` must match `params[i]`; moment
 * buffers are created on the first call.
 */
inline void adam_step(std::span<Tensor> params, const std::vector<std::vector<double>>& grads, AdamState& state,
                      double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");
  if (grads.size() != params.size()) throw DimensionError("adam_step: one gradient per parameter is required");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam_step: optimizer state built for other parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].size() != params[k].numel() || state.m[k].size() != params[k].numel()) {
      throw DimensionError("adam_step: gradient " + std::to_string(k) + " does not match parameter " +
                           shape_string(params[k].shape()));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k].mutable_data();
    auto& m = state.m[k];
    auto& v = state.v[k];
    const auto& g = grads[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

/// Gradients currently stored on `params` (zeros where none were produced).
inline std::vector<std::vector<double>> collect_grads(std::span<const Tensor> params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    if (p.has_grad()) {
      out.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      out.emplace_back(p.numel(), 0.0);
    }
  }
  return out;
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping. max_norm = 0 disables clipping.
inline double clip_global_norm(std::vector<std::vector<double>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double x : g) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) {
      for (auto& x : g) x *= s;
    }
  }
  return norm;
}

/// Parameters optimized together: one Adam state, one clipping norm.
struct ParamGroup {
  std::string name;
  std::vector<Tensor> params;
  AdamState adam;

  void zero_grad() {
    for (auto& p : params) p.zero_grad();
  }

  /// Clip, update, clear gradients. Returns the pre-clip gradient norm.
  double apply(double lr, double clip_norm) {
    auto grads = collect_grads(params);
    const double norm = clip_global_norm(grads, clip_norm);
    if (!std::isfinite(norm)) throw NumericError("non-finite gradient in parameter group " + name);
    adam_step(params, grads, adam, lr);
    zero_grad();
    return norm;
  }
};

inline std::vector<Tensor> tensors_of(const std::vector<NamedTensor>& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& [n, t] : named) out.push_back(t);
  return out;
}

}  // namespace flowda
