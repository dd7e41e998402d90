#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/data/basin.hpp"

namespace flowda {

struct SplitRanges {
  DateRange train;
  DateRange validation;
  DateRange test;

  /// Calendar split used for the CAMELS experiments. Validation precedes test.
  static SplitRanges defaults() {
    return {{parse_date("1999-10-01"), parse_date("2000-09-30")},
            {parse_date("1988-10-01"), parse_date("1989-09-30")},
            {parse_date("1989-10-01"), parse_date("1999-09-30")}};
  }

  void validate() const {
    for (const auto* r : {&train, &validation, &test}) {
      if (r->last < r->first) throw std::invalid_argument("split range ends before it starts: " + format_date(r->first));
    }
    if (train.overlaps(validation) || train.overlaps(test) || validation.overlaps(test)) {
      throw std::invalid_argument("split ranges overlap");
    }
  }
};

/// Date-sliced copy of `series` restricted to `range`; nullopt if the intersection is empty.
inline std::optional<BasinSeries> slice_dates(const BasinSeries& series, const DateRange& range) {
  series.validate();
  if (series.length() == 0) return std::nullopt;
  const Date series_last = series.date(series.length() - 1);
  const Date first = std::max(series.start, range.first);
  const Date last = std::min(series_last, range.last);
  if (last < first) return std::nullopt;
  const auto begin = static_cast<std::size_t>((first - series.start).count());
  const auto end = static_cast<std::size_t>((last - series.start).count()) + 1;
  const std::size_t d = series.dynamic_width();
  BasinSeries out;
  out.basin_id = series.basin_id;
  out.start = first;
  out.dynamic_names = series.dynamic_names;
  out.dynamic.assign(series.dynamic.begin() + static_cast<std::ptrdiff_t>(begin * d),
                     series.dynamic.begin() + static_cast<std::ptrdiff_t>(end * d));
  auto cut = [&](const auto& v) { return std::decay_t<decltype(v)>(v.begin() + static_cast<std::ptrdiff_t>(begin), v.begin() + static_cast<std::ptrdiff_t>(end)); };
  out.dynamic_valid = cut(series.dynamic_valid);
  out.streamflow = cut(series.streamflow);
  out.mask = cut(series.mask);
  return out;
}

struct SplitSeries {
  std::optional<BasinSeries> train, validation, test;
  std::vector<std::string> warnings;
};

/// Windows are built per slice, so none can straddle a boundary.
inline SplitSeries split_by_dates(const BasinSeries& series, const SplitRanges& ranges) {
  ranges.validate();
  SplitSeries out;
  auto take = [&](const DateRange& r, const char* name) {
    auto s = slice_dates(series, r);
    if (!s) {
      out.warnings.push_back("basin " + series.basin_id + " has no data in the " + name + " range " +
                             format_date(r.first) + ".." + format_date(r.last) + "; excluded from that split");
    }
    return s;
  };
  out.train = take(ranges.train, "train");
  out.validation = take(ranges.validation, "validation");
  out.test = take(ranges.test, "test");
  return out;
}

struct DomainSplit {
  DomainData train, validation, test;
  std::vector<std::string> warnings;
};

inline DomainSplit split_domain(const DomainData& data, const SplitRanges& ranges) {
  DomainSplit out;
  for (auto* part : {&out.train, &out.validation, &out.test}) part->statics = data.statics;
  for (const auto& b : data.basins) {
    auto s = split_by_dates(b, ranges);
    if (s.train) out.train.basins.push_back(std::move(*s.train));
    if (s.validation) out.validation.basins.push_back(std::move(*s.validation));
    if (s.test) out.test.basins.push_back(std::move(*s.test));
    out.warnings.insert(out.warnings.end(), s.warnings.begin(), s.warnings.end());
  }
  return out;
}

}  // namespace flowda
