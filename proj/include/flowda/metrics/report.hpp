#pragma once

#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowda/metrics/skill.hpp"

namespace flowda {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline nlohmann::json score_json(const Score& s) { return s ? nlohmann::json(*s) : nlohmann::json(nullptr); }

inline nlohmann::json skill_json(const SkillScores& s) {
  return {{"nse", score_json(s.nse)},
          {"kge", score_json(s.kge)},
          {"alpha_nse", score_json(s.alpha_nse)},
          {"beta_nse", score_json(s.beta_nse)},
          {"r", score_json(s.r)}};
}

inline nlohmann::json report_json(const MetricsReport& report) {
  nlohmann::json basins = nlohmann::json::array();
  for (const auto& b : report.basins) {
    auto j = skill_json(b.scores);
    j["basin_id"] = b.basin_id;
    j["points"] = b.points;
    basins.push_back(std::move(j));
  }
  return {{"seed", report.seed},
          {"basin_count", report.basins.size()},
          {"median", skill_json(report.median)},
          {"nse_negative_count", report.nse_negative_count},
          {"undefined_nse_count", report.undefined_nse_count},
          {"basins", std::move(basins)}};
}

inline std::string score_cell(const Score& s) { return s ? format_double(*s) : "NA"; }

/// One row per basin plus a final `median` summary row.
inline void write_report_csv(std::ostream& os, const MetricsReport& report) {
  os << "basin_id,points,nse,kge,alpha_nse,beta_nse,r\n";
  auto row = [&](const std::string& id, const std::string& points, const SkillScores& s) {
    os << id << ',' << points << ',' << score_cell(s.nse) << ',' << score_cell(s.kge) << ','
       << score_cell(s.alpha_nse) << ',' << score_cell(s.beta_nse) << ',' << score_cell(s.r) << '\n';
  };
  for (const auto& b : report.basins) row(b.basin_id, std::to_string(b.points), b.scores);
  row("median", "", report.median);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over runs
  std::size_t runs = 0;
};

inline MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  out.runs = values.size();
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

/// Mean and spread of per-run medians.
struct RunSummary {
  MeanStd nse, kge, alpha_nse, beta_nse, nse_negative_count;
  std::vector<MetricsReport> runs;
};

inline RunSummary summarize_runs(std::vector<MetricsReport> runs) {
  auto field = [&](Score SkillScores::*f) {
    std::vector<double> v;
    for (const auto& r : runs) {
      if (r.median.*f) v.push_back(*(r.median.*f));
    }
    return mean_std(v);
  };
  RunSummary s;
  s.nse = field(&SkillScores::nse);
  s.kge = field(&SkillScores::kge);
  s.alpha_nse = field(&SkillScores::alpha_nse);
  s.beta_nse = field(&SkillScores::beta_nse);
  std::vector<double> negatives;
  for (const auto& r : runs) negatives.push_back(static_cast<double>(r.nse_negative_count));
  s.nse_negative_count = mean_std(negatives);
  s.runs = std::move(runs);
  return s;
}

inline nlohmann::json summary_json(const RunSummary& s) {
  auto ms = [](const MeanStd& m) { return nlohmann::json{{"mean", m.mean}, {"std", m.std}, {"runs", m.runs}}; };
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : s.runs) {
    runs.push_back({{"seed", r.seed}, {"median", skill_json(r.median)}, {"nse_negative_count", r.nse_negative_count}});
  }
  return {{"nse", ms(s.nse)},
          {"kge", ms(s.kge)},
          {"alpha_nse", ms(s.alpha_nse)},
          {"beta_nse", ms(s.beta_nse)},
          {"nse_negative_count", ms(s.nse_negative_count)},
          {"runs", std::move(runs)}};
}

}  // namespace flowda
