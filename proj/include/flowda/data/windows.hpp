#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/data/basin.hpp"
#include "flowda/data/normalize.hpp"

namespace flowda {

struct WindowConfig {
  std::size_t history = 90;  // N
  std::size_t horizon = 1;   // tau
  std::size_t stride = 1;

  void validate() const {
    if (history < 1 || horizon < 1 || stride < 1) throw std::invalid_argument("window sizes and stride must be >= 1");
  }
};

/// One normalized (history, target) example.
struct WindowSample {
  std::string basin_id;
  Date target_date{};  // date of the first target step
  std::size_t history_length = 0;
  std::size_t horizon = 0;
  std::size_t dynamic_width = 0;
  std::vector<double> history;  // [N x d]
  std::vector<double> statics;
  double last_observed_y = 0.0;
  std::vector<double> targets;  // masked entries hold 0
  Mask target_mask;
  double flow_variance = 0.0;   // basin's normalized training-period variance, for the loss

  std::size_t observed_targets() const {
    std::size_t n = 0;
    for (auto m : target_mask) n += m ? 1 : 0;
    return n;
  }
};

/**
 * Slides an (N + tau) window over `series`. Windows with any invalid history
 * row or with every target masked are dropped. `last_observed_y` is the most
 * recent observed flow inside the history, or 0 (the normalized mean) if the
 * history has none.
 */
inline std::vector<WindowSample> make_windows(const BasinSeries& series, std::span<const double> static_values,
                                              const NormStats& stats, const WindowConfig& config,
                                              double flow_variance = 0.0) {
  config.validate();
  series.validate();
  std::vector<WindowSample> out;
  const std::size_t span_len = config.history + config.horizon;
  if (series.length() < span_len) return out;
  const auto statics = stats.normalize_static(static_values);
  const std::size_t d = series.dynamic_width();

  // Prefix count of invalid rows for O(1) history checks.
  std::vector<std::size_t> invalid_prefix(series.length() + 1, 0);
  for (std::size_t t = 0; t < series.length(); ++t) {
    invalid_prefix[t + 1] = invalid_prefix[t] + (series.dynamic_valid[t] ? 0 : 1);
  }

  for (std::size_t s = 0; s + span_len <= series.length(); s += config.stride) {
    const std::size_t target0 = s + config.history;
    if (invalid_prefix[target0] != invalid_prefix[s]) continue;
    bool any_target = false;
    for (std::size_t k = 0; k < config.horizon; ++k) any_target = any_target || series.mask[target0 + k];
    if (!any_target) continue;

    WindowSample w;
    w.basin_id = series.basin_id;
    w.target_date = series.date(target0);
    w.history_length = config.history;
    w.horizon = config.horizon;
    w.dynamic_width = d;
    w.statics = statics;
    w.flow_variance = flow_variance;
    w.history.reserve(config.history * d);
    for (std::size_t t = s; t < target0; ++t) {
      auto row = stats.normalize_dynamic(series.dynamic_row(t));
      w.history.insert(w.history.end(), row.begin(), row.end());
    }
    for (std::size_t t = target0; t-- > s;) {
      if (series.mask[t]) {
        w.last_observed_y = stats.normalize_flow(series.streamflow[t]);
        break;
      }
    }
    for (std::size_t k = 0; k < config.horizon; ++k) {
      const bool seen = series.mask[target0 + k] != 0;
      w.targets.push_back(seen ? stats.normalize_flow(series.streamflow[target0 + k]) : 0.0);
      w.target_mask.push_back(seen ? 1 : 0);
    }
    out.push_back(std::move(w));
  }
  return out;
}

/// Windows for every basin of a domain, in basin order.
inline std::vector<WindowSample> make_domain_windows(const DomainData& data, const NormStats& stats,
                                                     const WindowConfig& config,
                                                     const std::vector<double>* flow_variances = nullptr) {
  std::vector<WindowSample> all;
  for (std::size_t i = 0; i < data.basins.size(); ++i) {
    const auto& b = data.basins[i];
    const double var = flow_variances ? flow_variances->at(i) : normalized_flow_variance(b, stats);
    auto w = make_windows(b, data.static_values(b.basin_id), stats, config, var);
    all.insert(all.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return all;
}

class InsufficientHistoryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * Window for a forecast issued at the end of `issue_date`: the N days ending
 * on that date form the history, targets start the next day. Target values
 * are filled where the series has them, so the result matches the window
 * make_windows would build for the same target date.
 */
inline WindowSample forecast_window(const BasinSeries& series, std::span<const double> static_values,
                                    const NormStats& stats, std::size_t history, std::size_t horizon, Date issue_date,
                                    double flow_variance = 0.0) {
  series.validate();
  if (history < 1 || horizon < 1) throw std::invalid_argument("forecast_window: history and horizon must be >= 1");
  const auto offset = (issue_date - series.start).count();
  if (offset < 0 || offset >= static_cast<long>(series.length())) {
    throw InsufficientHistoryError("issue date " + format_date(issue_date) + " is outside the series of basin " +
                                   series.basin_id);
  }
  const auto last = static_cast<std::size_t>(offset);
  std::size_t valid = 0;
  for (std::size_t t = last + 1; t-- > 0 && valid < history && series.dynamic_valid[t];) ++valid;
  if (valid < history) {
    throw InsufficientHistoryError("forecast needs N=" + std::to_string(history) +
                                   " consecutive days of complete forcings ending on " + format_date(issue_date) +
                                   "; basin " + series.basin_id + " has " + std::to_string(valid));
  }
  const std::size_t s = last + 1 - history;
  WindowSample w;
  w.basin_id = series.basin_id;
  w.target_date = issue_date + std::chrono::days{1};
  w.history_length = history;
  w.horizon = horizon;
  w.dynamic_width = series.dynamic_width();
  w.statics = stats.normalize_static(static_values);
  w.flow_variance = flow_variance;
  for (std::size_t t = s; t <= last; ++t) {
    auto row = stats.normalize_dynamic(series.dynamic_row(t));
    w.history.insert(w.history.end(), row.begin(), row.end());
  }
  for (std::size_t t = last + 1; t-- > s;) {
    if (series.mask[t]) {
      w.last_observed_y = stats.normalize_flow(series.streamflow[t]);
      break;
    }
  }
  for (std::size_t k = 0; k < horizon; ++k) {
    const std::size_t t = last + 1 + k;
    const bool seen = t < series.length() && series.mask[t] != 0;
    w.targets.push_back(seen ? stats.normalize_flow(series.streamflow[t]) : 0.0);
    w.target_mask.push_back(seen ? 1 : 0);
  }
  return w;
}

}  // namespace flowda
