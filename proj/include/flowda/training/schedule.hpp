#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/layers/init.hpp"

namespace flowda {

/// Independent generators derived from the run seed, one per purpose, so
/// that e.g. source dropout draws never shift the target shuffle.
struct RngStreams {
  Rng init_source, init_target, init_shared;
  Rng dropout_source, dropout_target;
  Rng shuffle_source, shuffle_target;

  static RngStreams from_seed(std::uint64_t seed) {
    auto make = [seed](std::uint32_t purpose) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose, 0x5eedu};
      return Rng(seq);
    };
    return {make(1), make(2), make(3), make(4), make(5), make(6), make(7)};
  }

  std::vector<Rng*> all() {
    return {&init_source, &init_target, &init_shared, &dropout_source, &dropout_target, &shuffle_source, &shuffle_target};
  }

  /// Text form of every engine state (std::mt19937_64 stream format).
  std::string serialize() {
    std::ostringstream os;
    for (auto* r : all()) os << *r << '\n';
    return os.str();
  }

  void deserialize(const std::string& text) {
    std::istringstream is(text);
    RngStreams tmp = *this;
    for (auto* r : tmp.all()) {
      is >> *r;
      if (!is) throw std::invalid_argument("corrupt RNG state");
    }
    *this = tmp;
  }
};

/// Endless stream of indices in [0, n): successive shuffled permutations.
class IndexStream {
 public:
  IndexStream(std::size_t n, Rng& rng) : n_(n), rng_(&rng) {}

  std::vector<std::size_t> take(std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count) {
      if (pos_ == order_.size()) refill();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void refill() {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), *rng_);
    pos_ = 0;
  }

  std::size_t n_;
  Rng* rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

struct BatchPair {
  std::vector<std::size_t> source;
  std::vector<std::size_t> target;
};

/**
 * One epoch of paired batches. The epoch covers the larger set once; the
 * smaller set is cycled (reshuffled each pass). Each domain is shuffled by
 * its own generator, so a source-only schedule built from the same state
 * draws the same source batches.
 */
inline std::vector<BatchPair> paired_schedule(std::size_t n_source, std::size_t n_target, std::size_t batch_size,
                                              Rng& source_rng, Rng& target_rng) {
  if (n_source == 0 || n_target == 0) throw std::invalid_argument("paired_schedule: both domains need windows");
  if (batch_size == 0) throw std::invalid_argument("paired_schedule: batch_size must be >= 1");
  const std::size_t steps = (std::max(n_source, n_target) + batch_size - 1) / batch_size;
  IndexStream src(n_source, source_rng), tgt(n_target, target_rng);
  std::vector<BatchPair> out(steps);
  for (auto& p : out) p.source = src.take(std::min(batch_size, n_source));
  for (auto& p : out) p.target = tgt.take(std::min(batch_size, n_target));
  return out;
}

/// Single-domain schedule: ceil(n / batch_size) batches from one shuffle.
inline std::vector<std::vector<std::size_t>> single_schedule(std::size_t n, std::size_t batch_size, Rng& rng) {
  if (n == 0) throw std::invalid_argument("single_schedule: no windows");
  if (batch_size == 0) throw std::invalid_argument("single_schedule: batch_size must be >= 1");
  const std::size_t steps = (n + batch_size - 1) / batch_size;
  IndexStream s(n, rng);
  std::vector<std::vector<std::size_t>> out(steps);
  for (auto& b : out) b = s.take(std::min(batch_size, n));
  return out;
}

}  // namespace flowda
