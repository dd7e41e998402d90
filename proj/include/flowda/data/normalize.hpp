#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/data/basin.hpp"

namespace flowda {

/// Per-channel z-score statistics. Constant channels get std 1 and a flag.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<std::uint8_t> constant;

  std::size_t width() const { return mean.size(); }
};

struct NormStats {
  ChannelStats dynamic;
  ChannelStats statics;
  double flow_mean = 0.0;
  double flow_std = 1.0;
  bool flow_constant = false;

  double normalize_flow(double q) const { return (q - flow_mean) / flow_std; }
  double denormalize_flow(double z) const { return z * flow_std + flow_mean; }

  std::vector<double> normalize_dynamic(std::span<const double> row) const { return apply(dynamic, row); }
  std::vector<double> normalize_static(std::span<const double> row) const { return apply(statics, row); }
  std::vector<double> denormalize_dynamic(std::span<const double> row) const {
    check(dynamic, row);
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] * dynamic.std[i] + dynamic.mean[i];
    return out;
  }

 private:
  static void check(const ChannelStats& c, std::span<const double> row) {
    if (row.size() != c.width()) {
      throw std::invalid_argument("normalization width mismatch: expected " + std::to_string(c.width()) + ", got " +
                                  std::to_string(row.size()));
    }
  }
  static std::vector<double> apply(const ChannelStats& c, std::span<const double> row) {
    check(c, row);
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) out[i] = (row[i] - c.mean[i]) / c.std[i];
    return out;
  }
};

namespace detail {

struct RunningMoments {
  std::vector<double> sum, sum_sq;
  std::vector<std::size_t> count;

  explicit RunningMoments(std::size_t width) : sum(width, 0.0), sum_sq(width, 0.0), count(width, 0) {}

  void add(std::size_t i, double v) {
    sum[i] += v;
    sum_sq[i] += v * v;
    ++count[i];
  }

  ChannelStats finish() const {
    ChannelStats s;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      const double n = static_cast<double>(count[i]);
      const double mean = count[i] ? sum[i] / n : 0.0;
      const double var = count[i] ? std::max(0.0, sum_sq[i] / n - mean * mean) : 0.0;
      const double sd = std::sqrt(var);
      // Relative threshold: population variance via sums loses ~1e-16 * mean^2.
      const bool flat = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
      s.mean.push_back(mean);
      s.std.push_back(flat ? 1.0 : sd);
      s.constant.push_back(flat ? 1 : 0);
    }
    return s;
  }
};

}  // namespace detail

/**
 * Pooled statistics over one domain's training split. Dynamic channels use
 * rows flagged valid, streamflow uses observed points only, statics use one
 * record per basin in `basins`.
 */
inline NormStats compute_norm_stats(std::span<const BasinSeries> basins, const StaticTable& statics) {
  if (basins.empty()) throw std::invalid_argument("compute_norm_stats: empty training split");
  const std::size_t d = basins.front().dynamic_width();
  detail::RunningMoments dyn(d), stat(statics.names.size()), flow(1);
  for (const auto& b : basins) {
    b.validate();
    if (b.dynamic_width() != d) throw std::invalid_argument("compute_norm_stats: basins disagree on dynamic width");
    for (std::size_t t = 0; t < b.length(); ++t) {
      if (b.dynamic_valid[t]) {
        auto row = b.dynamic_row(t);
        for (std::size_t f = 0; f < d; ++f) dyn.add(f, row[f]);
      }
      if (b.mask[t]) flow.add(0, b.streamflow[t]);
    }
    const auto* s = statics.find(b.basin_id);
    if (!s) throw std::invalid_argument("compute_norm_stats: no static attributes for basin " + b.basin_id);
    if (s->values.size() != statics.names.size()) throw std::invalid_argument("static width mismatch for " + b.basin_id);
    for (std::size_t f = 0; f < s->values.size(); ++f) stat.add(f, s->values[f]);
  }
  NormStats out;
  out.dynamic = dyn.finish();
  out.statics = stat.finish();
  auto f = flow.finish();
  if (flow.count[0] == 0) throw std::invalid_argument("compute_norm_stats: no observed streamflow in training split");
  out.flow_mean = f.mean[0];
  out.flow_std = f.std[0];
  out.flow_constant = f.constant[0] != 0;
  return out;
}

/// Population variance of one basin's observed flows in normalized units.
inline double normalized_flow_variance(const BasinSeries& basin, const NormStats& stats) {
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < basin.length(); ++t) {
    if (!basin.mask[t]) continue;
    const double z = stats.normalize_flow(basin.streamflow[t]);
    sum += z;
    sum_sq += z * z;
    ++n;
  }
  if (n == 0) return 0.0;
  const double mean = sum / static_cast<double>(n);
  return std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
}

}  // namespace flowda
