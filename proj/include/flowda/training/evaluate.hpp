#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/data/normalize.hpp"
#include "flowda/data/windows.hpp"
#include "flowda/metrics/skill.hpp"
#include "flowda/model.hpp"

namespace flowda {

/// Normalized forecasts for windows[indices], row-major [indices.size() x tau].
using Predictor =
    std::function<std::vector<double>(const std::vector<WindowSample>& windows, std::span<const std::size_t> indices)>;

/// Free-running, dropout-free generator forecasts.
inline Predictor generator_predictor(const GeneratorNetwork& gen) {
  return [&gen](const std::vector<WindowSample>& windows, std::span<const std::size_t> indices) {
    NoGradGuard no_grad;
    Rng unused(0);
    Tensor pred = generator_forward(gen, make_batch(windows, indices), ForwardMode::kEval, unused, false).predictions;
    return std::vector<double>(pred.data().begin(), pred.data().end());
  };
}

inline Predictor regressor_predictor(const LstmRegressor& model) {
  return [&model](const std::vector<WindowSample>& windows, std::span<const std::size_t> indices) {
    NoGradGuard no_grad;
    Rng unused(0);
    Tensor pred = regressor_forward(model, make_batch(windows, indices), ForwardMode::kEval, unused);
    return std::vector<double>(pred.data().begin(), pred.data().end());
  };
}

/// One denormalized forecast value. `observed` is empty where the flow is missing.
struct PredictionRecord {
  std::string basin_id;
  Date issue_date{};   // day of the last history step
  Date target_date{};
  std::size_t lead = 1;
  double predicted = 0.0;
  std::optional<double> observed;
};

struct Evaluation {
  MetricsReport report;
  std::vector<PredictionRecord> predictions;
  std::vector<std::string> warnings;
};

struct EvaluateOptions {
  std::size_t chunk = 256;
  std::uint64_t seed = 0;
};

/**
 * Scores lead-1 forecasts per basin in physical units. `basin_ids` lists the
 * basins expected in the report; a basin without windows is left out with a
 * warning. Predictions of every lead are returned for export.
 */
inline Evaluation evaluate(const Predictor& predict, const std::vector<WindowSample>& windows,
                           const std::vector<std::string>& basin_ids, const NormStats& stats,
                           const EvaluateOptions& options = {}) {
  if (options.chunk == 0) throw std::invalid_argument("evaluate: chunk must be >= 1");
  std::map<std::string, std::vector<std::size_t>> by_basin;
  for (std::size_t i = 0; i < windows.size(); ++i) by_basin[windows[i].basin_id].push_back(i);

  Evaluation out;
  std::vector<BasinSkill> skills;
  for (const auto& id : basin_ids) {
    auto it = by_basin.find(id);
    if (it == by_basin.end()) {
      out.warnings.push_back("basin " + id + " has no valid evaluation windows; excluded");
      continue;
    }
    const auto& idx = it->second;
    std::vector<double> pred, obs;
    std::vector<std::uint8_t> mask;
    for (std::size_t start = 0; start < idx.size(); start += options.chunk) {
      const std::size_t n = std::min(options.chunk, idx.size() - start);
      std::span<const std::size_t> part(idx.data() + start, n);
      const auto values = predict(windows, part);
      const std::size_t tau = windows[part.front()].horizon;
      if (values.size() != n * tau) throw DimensionError("evaluate: predictor returned the wrong number of values");
      for (std::size_t j = 0; j < n; ++j) {
        const auto& w = windows[part[j]];
        for (std::size_t k = 0; k < tau; ++k) {
          PredictionRecord r;
          r.basin_id = id;
          r.issue_date = w.target_date - std::chrono::days{1};
          r.target_date = w.target_date + std::chrono::days{static_cast<long>(k)};
          r.lead = k + 1;
          r.predicted = stats.denormalize_flow(values[j * tau + k]);
          if (w.target_mask[k]) r.observed = stats.denormalize_flow(w.targets[k]);
          if (k == 0) {
            pred.push_back(r.predicted);
            obs.push_back(r.observed.value_or(0.0));
            mask.push_back(w.target_mask[0]);
          }
          out.predictions.push_back(std::move(r));
        }
      }
    }
    BasinSkill b;
    b.basin_id = id;
    b.scores = skill_scores(pred, obs, mask);
    for (auto m : mask) b.points += m ? 1 : 0;
    skills.push_back(std::move(b));
  }
  if (skills.empty()) throw std::invalid_argument("evaluate: no basin has evaluation windows");
  out.report = aggregate(std::move(skills), options.seed);
  return out;
}

/// Distinct basin ids in first-seen order.
inline std::vector<std::string> basin_ids_of(const std::vector<WindowSample>& windows) {
  std::vector<std::string> ids;
  for (const auto& w : windows) {
    if (ids.empty() || ids.back() != w.basin_id) {
      if (std::find(ids.begin(), ids.end(), w.basin_id) == ids.end()) ids.push_back(w.basin_id);
    }
  }
  return ids;
}

}  // namespace flowda
