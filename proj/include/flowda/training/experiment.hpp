#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "flowda/metrics/report.hpp"
#include "flowda/training/session.hpp"

namespace flowda {

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<TrainLogEntry> log;
  Evaluation test;  // best-validation parameters on the target test split
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  RunSummary summary;
};

/// Trains `n_runs` models with seeds seed..seed+n_runs-1 and summarizes
/// their per-run test medians as mean and population std.
inline ExperimentResult run_experiment(const TrainConfig& config, const ExperimentData& data, std::size_t n_runs,
                                       const std::function<void(const RunResult&)>& on_run = {}) {
  if (n_runs < 1) throw std::invalid_argument("run_experiment: n_runs must be >= 1");
  ExperimentResult out;
  std::vector<MetricsReport> reports;
  for (std::size_t i = 0; i < n_runs; ++i) {
    TrainConfig c = config;
    c.seed = config.seed + i;
    TrainingSession session(c, data);
    session.run();
    RunResult r;
    r.seed = c.seed;
    r.log = session.log();
    r.test = session.evaluate_best_target_test();
    r.test.report.seed = c.seed;
    if (on_run) on_run(r);
    reports.push_back(r.test.report);
    out.runs.push_back(std::move(r));
  }
  out.summary = summarize_runs(std::move(reports));
  return out;
}

}  // namespace flowda
