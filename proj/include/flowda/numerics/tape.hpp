#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "flowda/numerics/tensor.hpp"

namespace flowda {

/**
 * Ordered record of differentiable operations.
 *
 * Constructing a tape makes it the active tape of the calling thread until it
 * is destroyed; operations whose inputs require gradients append an entry to
 * the active tape. backward() replays the entries once, in reverse, and then
 * the tape is consumed.
 */
class GradientTape {
 public:
  using Propagate = std::function<void(std::span<const double> output_grad)>;

  GradientTape() : previous_(current_) { current_ = this; }
  ~GradientTape() {
    if (current_ == this) current_ = previous_;
  }
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  static GradientTape* active() { return current_; }

  void record(const Tensor& output, Propagate propagate) {
    if (consumed_) throw TapeError("cannot record on a consumed tape");
    entries_.push_back({output.storage_ptr(), std::move(propagate)});
  }

  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

  /// Accumulates d(loss)/d(t) into every requires_grad tensor reachable from loss.
  void backward(const Tensor& loss) {
    if (consumed_) throw TapeError("backward called on a consumed tape");
    if (loss.numel() != 1) throw DimensionError("backward requires a scalar loss, got " + shape_string(loss.shape()));
    if (!loss.requires_grad()) throw TapeError("loss was not produced under a recording tape");
    consumed_ = true;
    loss.storage_ptr()->ensure_grad()[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      auto& out = *it->output;
      if (out.grad.size() != out.data.size()) continue;  // not reachable from the loss
      it->propagate(out.grad);
    }
    entries_.clear();
    entries_.shrink_to_fit();
  }

 private:
  struct Entry {
    std::shared_ptr<detail::TensorStorage> output;
    Propagate propagate;
  };

  std::vector<Entry> entries_;
  GradientTape* previous_;
  bool consumed_ = false;

  static inline thread_local GradientTape* current_ = nullptr;

  friend class NoGradGuard;
};

/// Suspends recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : saved_(GradientTape::current_) { GradientTape::current_ = nullptr; }
  ~NoGradGuard() { GradientTape::current_ = saved_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  GradientTape* saved_;
};

}  // namespace flowda
