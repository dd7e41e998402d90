#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowda {

using Date = std::chrono::sys_days;
using Mask = std::vector<std::uint8_t>;

/// Parses an ISO-8601 calendar date (YYYY-MM-DD).
inline std::optional<Date> try_parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
    if (text[i] < '0' || text[i] > '9') return std::nullopt;
  }
  y = std::stoi(std::string(text.substr(0, 4)));
  m = static_cast<unsigned>(std::stoi(std::string(text.substr(5, 2))));
  d = static_cast<unsigned>(std::stoi(std::string(text.substr(8, 2))));
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

inline Date parse_date(std::string_view text) {
  auto d = try_parse_date(text);
  if (!d) throw std::invalid_argument("invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
  return *d;
}

inline std::string format_date(Date date) {
  std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

/// Inclusive calendar range.
struct DateRange {
  Date first;
  Date last;

  bool contains(Date d) const { return first <= d && d <= last; }
  std::size_t days() const { return static_cast<std::size_t>((last - first).count() + 1); }
  bool overlaps(const DateRange& o) const { return first <= o.last && o.first <= last; }
};

/**
 * Daily dynamic forcings and observed streamflow for one basin.
 *
 * Dates are contiguous from `start`. Rows whose dynamic values could not be
 * filled are flagged in `dynamic_valid`; unobserved streamflow has mask 0
 * and a stored value of 0.
 */
struct BasinSeries {
  std::string basin_id;
  Date start{};
  std::vector<std::string> dynamic_names;
  std::vector<double> dynamic;  // [length x width], row-major
  Mask dynamic_valid;
  std::vector<double> streamflow;
  Mask mask;

  std::size_t length() const { return streamflow.size(); }
  std::size_t dynamic_width() const { return dynamic_names.size(); }
  Date date(std::size_t i) const { return start + std::chrono::days{static_cast<int>(i)}; }
  std::span<const double> dynamic_row(std::size_t i) const {
    return std::span<const double>(dynamic).subspan(i * dynamic_width(), dynamic_width());
  }

  void validate() const {
    const auto n = length();
    if (dynamic.size() != n * dynamic_width() || dynamic_valid.size() != n || mask.size() != n) {
      throw std::invalid_argument("basin " + basin_id + ": inconsistent series lengths");
    }
  }
};

struct StaticAttributes {
  std::string basin_id;
  std::vector<double> values;
};

/// All static attribute records of one domain.
struct StaticTable {
  std::vector<std::string> names;
  std::vector<StaticAttributes> rows;

  const StaticAttributes* find(const std::string& basin_id) const {
    for (const auto& r : rows) {
      if (r.basin_id == basin_id) return &r;
    }
    return nullptr;
  }
};

struct DomainData {
  std::vector<BasinSeries> basins;
  StaticTable statics;

  const std::vector<double>& static_values(const std::string& basin_id) const {
    const auto* row = statics.find(basin_id);
    if (!row) throw std::out_of_range("no static attributes for basin " + basin_id);
    return row->values;
  }
};

}  // namespace flowda
