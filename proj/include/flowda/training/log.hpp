#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace flowda {

/// One completed epoch. Losses a phase does not compute are NaN and are
/// written as JSON null.
struct TrainLogEntry {
  std::size_t epoch = 0;  // counts across phases, from 1
  std::string phase;      // adversarial, pretrain or finetune
  double lr = 0.0;
  double loss_gs = std::numeric_limits<double>::quiet_NaN();
  double loss_gt = std::numeric_limits<double>::quiet_NaN();
  double loss_d = std::numeric_limits<double>::quiet_NaN();
  double loss_d_start = std::numeric_limits<double>::quiet_NaN();
  double disc_accuracy = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> val_nse;  // target validation median NSE
  std::size_t steps = 0;

  friend bool operator==(const TrainLogEntry& a, const TrainLogEntry& b) {
    auto same = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
    return a.epoch == b.epoch && a.phase == b.phase && a.lr == b.lr && same(a.loss_gs, b.loss_gs) &&
           same(a.loss_gt, b.loss_gt) && same(a.loss_d, b.loss_d) && same(a.loss_d_start, b.loss_d_start) &&
           same(a.disc_accuracy, b.disc_accuracy) && a.val_nse == b.val_nse && a.steps == b.steps;
  }
};

namespace detail {

inline nlohmann::json nullable(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline double from_nullable(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const TrainLogEntry& e) {
  using detail::nullable;
  return {{"epoch", e.epoch},
          {"phase", e.phase},
          {"lr", e.lr},
          {"loss_gs", nullable(e.loss_gs)},
          {"loss_gt", nullable(e.loss_gt)},
          {"loss_d", nullable(e.loss_d)},
          {"loss_d_start", nullable(e.loss_d_start)},
          {"disc_accuracy", nullable(e.disc_accuracy)},
          {"val_nse", e.val_nse ? nlohmann::json(*e.val_nse) : nlohmann::json(nullptr)},
          {"steps", e.steps}};
}

inline TrainLogEntry log_entry_from_json(const nlohmann::json& j) {
  TrainLogEntry e;
  e.epoch = j.at("epoch").get<std::size_t>();
  e.phase = j.at("phase").get<std::string>();
  e.lr = j.at("lr").get<double>();
  e.loss_gs = detail::from_nullable(j.at("loss_gs"));
  e.loss_gt = detail::from_nullable(j.at("loss_gt"));
  e.loss_d = detail::from_nullable(j.at("loss_d"));
  e.loss_d_start = detail::from_nullable(j.at("loss_d_start"));
  e.disc_accuracy = detail::from_nullable(j.at("disc_accuracy"));
  if (!j.at("val_nse").is_null()) e.val_nse = j.at("val_nse").get<double>();
  e.steps = j.at("steps").get<std::size_t>();
  return e;
}

/// One JSON object per line.
inline void write_log_line(std::ostream& os, const TrainLogEntry& e) { os << to_json(e).dump() << '\n'; }

inline std::vector<TrainLogEntry> read_log(std::istream& is) {
  std::vector<TrainLogEntry> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) out.push_back(log_entry_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace flowda
