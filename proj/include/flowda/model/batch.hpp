#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "flowda/data/windows.hpp"
#include "flowda/numerics/tensor.hpp"

namespace flowda {

/// A group of windows packed into flat buffers for one forward pass.
struct Batch {
  std::size_t size = 0;     // B
  std::size_t history = 0;  // N
  std::size_t horizon = 0;  // tau
  std::size_t dynamic_width = 0;
  std::size_t static_width = 0;
  std::vector<double> dynamic;        // [B x N x d]
  std::vector<double> statics;        // [B x s]
  std::vector<double> last_y;         // [B]
  std::vector<double> targets;        // [B x tau]
  std::vector<double> target_mask;    // [B x tau], 1 = observed
  std::vector<double> flow_variance;  // [B]

  Tensor last_y_tensor() const { return Tensor({size, 1}, last_y); }
  Tensor targets_tensor() const { return Tensor({size, horizon}, targets); }
  Tensor mask_tensor() const { return Tensor({size, horizon}, target_mask); }
};

inline Batch make_batch(const std::vector<WindowSample>& windows, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
  const auto& first = windows.at(indices.front());
  Batch b;
  b.size = indices.size();
  b.history = first.history_length;
  b.horizon = first.horizon;
  b.dynamic_width = first.dynamic_width;
  b.static_width = first.statics.size();
  for (std::size_t i : indices) {
    const auto& w = windows.at(i);
    if (w.history_length != b.history || w.horizon != b.horizon || w.dynamic_width != b.dynamic_width ||
        w.statics.size() != b.static_width) {
      throw DimensionError("make_batch: windows disagree on shape");
    }
    b.dynamic.insert(b.dynamic.end(), w.history.begin(), w.history.end());
    b.statics.insert(b.statics.end(), w.statics.begin(), w.statics.end());
    b.last_y.push_back(w.last_observed_y);
    b.targets.insert(b.targets.end(), w.targets.begin(), w.targets.end());
    for (auto m : w.target_mask) b.target_mask.push_back(m ? 1.0 : 0.0);
    b.flow_variance.push_back(w.flow_variance);
  }
  return b;
}

inline Batch make_batch(const std::vector<WindowSample>& windows) {
  std::vector<std::size_t> all(windows.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return make_batch(windows, all);
}

}  // namespace flowda
