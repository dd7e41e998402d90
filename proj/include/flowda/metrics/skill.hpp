#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Hydrological skill scores. Undefined scores (too few points, zero
// variance) are std::nullopt, never NaN.

namespace flowda {

using Score = std::optional<double>;
using Mask = std::vector<std::uint8_t>;

namespace detail {

struct PairedMoments {
  std::size_t count = 0;
  double mean_m = 0.0, mean_o = 0.0;
  double var_m = 0.0, var_o = 0.0, cov = 0.0;  // population (divide by count)
  double sse = 0.0;                           // sum (m - o)^2
  double sst = 0.0;                           // sum (o - mean_o)^2
};

inline PairedMoments paired_moments(std::span<const double> predicted, std::span<const double> observed,
                                    std::span<const std::uint8_t> mask) {
  if (predicted.size() != observed.size() || (!mask.empty() && mask.size() != observed.size())) {
    throw std::invalid_argument("skill score inputs must have equal lengths");
  }
  auto use = [&](std::size_t i) { return mask.empty() || mask[i] != 0; };
  PairedMoments m;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!use(i)) continue;
    ++m.count;
    m.mean_m += predicted[i];
    m.mean_o += observed[i];
  }
  if (m.count == 0) return m;
  const double n = static_cast<double>(m.count);
  m.mean_m /= n;
  m.mean_o /= n;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!use(i)) continue;
    const double dm = predicted[i] - m.mean_m;
    const double dobs = observed[i] - m.mean_o;
    m.var_m += dm * dm;
    m.var_o += dobs * dobs;
    m.cov += dm * dobs;
    m.sse += (predicted[i] - observed[i]) * (predicted[i] - observed[i]);
  }
  m.sst = m.var_o;
  m.var_m /= n;
  m.var_o /= n;
  m.cov /= n;
  return m;
}

}  // namespace detail

/// 1 - sum (Q_m - Q_o)^2 / sum (Q_o - mean(Q_o))^2 over unmasked points.
inline Score nse(std::span<const double> predicted, std::span<const double> observed,
                 std::span<const std::uint8_t> mask = {}) {
  const auto m = detail::paired_moments(predicted, observed, mask);
  if (m.count < 2 || !(m.sst > 0.0)) return std::nullopt;
  return 1.0 - m.sse / m.sst;
}

/// Pearson correlation.
inline Score pearson_r(std::span<const double> predicted, std::span<const double> observed,
                       std::span<const std::uint8_t> mask = {}) {
  const auto m = detail::paired_moments(predicted, observed, mask);
  if (m.count < 2 || !(m.var_m > 0.0) || !(m.var_o > 0.0)) return std::nullopt;
  return m.cov / std::sqrt(m.var_m * m.var_o);
}

/// sigma_m / sigma_o.
inline Score alpha_nse(std::span<const double> predicted, std::span<const double> observed,
                       std::span<const std::uint8_t> mask = {}) {
  const auto m = detail::paired_moments(predicted, observed, mask);
  if (m.count < 2 || !(m.var_o > 0.0)) return std::nullopt;
  return std::sqrt(m.var_m) / std::sqrt(m.var_o);
}

/// (mu_m - mu_o) / sigma_o.
inline Score beta_nse(std::span<const double> predicted, std::span<const double> observed,
                      std::span<const std::uint8_t> mask = {}) {
  const auto m = detail::paired_moments(predicted, observed, mask);
  if (m.count < 2 || !(m.var_o > 0.0)) return std::nullopt;
  return (m.mean_m - m.mean_o) / std::sqrt(m.var_o);
}

/// 1 - sqrt((r-1)^2 + (alpha-1)^2 + (beta-1)^2) with beta = mu_m / mu_o.
inline Score kge(std::span<const double> predicted, std::span<const double> observed,
                 std::span<const std::uint8_t> mask = {}) {
  const auto m = detail::paired_moments(predicted, observed, mask);
  if (m.count < 2 || !(m.var_m > 0.0) || !(m.var_o > 0.0) || m.mean_o == 0.0) return std::nullopt;
  const double r = m.cov / std::sqrt(m.var_m * m.var_o);
  const double alpha = std::sqrt(m.var_m) / std::sqrt(m.var_o);
  const double beta = m.mean_m / m.mean_o;
  return 1.0 - std::sqrt((r - 1.0) * (r - 1.0) + (alpha - 1.0) * (alpha - 1.0) + (beta - 1.0) * (beta - 1.0));
}

struct SkillScores {
  Score nse, kge, alpha_nse, beta_nse, r;
};

inline SkillScores skill_scores(std::span<const double> predicted, std::span<const double> observed,
                                std::span<const std::uint8_t> mask = {}) {
  return {flowda::nse(predicted, observed, mask), flowda::kge(predicted, observed, mask),
          flowda::alpha_nse(predicted, observed, mask), flowda::beta_nse(predicted, observed, mask),
          flowda::pearson_r(predicted, observed, mask)};
}

struct BasinSkill {
  std::string basin_id;
  SkillScores scores;
  std::size_t points = 0;
};

struct MetricsReport {
  std::vector<BasinSkill> basins;
  SkillScores median;
  std::size_t nse_negative_count = 0;
  std::size_t undefined_nse_count = 0;
  std::uint64_t seed = 0;
};

/// Median of the defined values; even counts average the two middle values.
inline Score median(std::vector<Score> values) {
  std::vector<double> defined;
  for (const auto& v : values) {
    if (v) defined.push_back(*v);
  }
  if (defined.empty()) return std::nullopt;
  std::sort(defined.begin(), defined.end());
  const std::size_t n = defined.size();
  if (n % 2 == 1) return defined[n / 2];
  return 0.5 * (defined[n / 2 - 1] + defined[n / 2]);
}

inline MetricsReport aggregate(std::vector<BasinSkill> per_basin, std::uint64_t seed = 0) {
  if (per_basin.empty()) throw std::invalid_argument("aggregate: no basins");
  MetricsReport report;
  report.seed = seed;
  auto collect = [&](Score SkillScores::*field) {
    std::vector<Score> v;
    for (const auto& b : per_basin) v.push_back(b.scores.*field);
    return median(std::move(v));
  };
  report.median = {collect(&SkillScores::nse), collect(&SkillScores::kge), collect(&SkillScores::alpha_nse),
                   collect(&SkillScores::beta_nse), collect(&SkillScores::r)};
  for (const auto& b : per_basin) {
    if (!b.scores.nse) {
      ++report.undefined_nse_count;
    } else if (*b.scores.nse < 0.0) {
      ++report.nse_negative_count;
    }
  }
  report.basins = std::move(per_basin);
  return report;
}

}  // namespace flowda
