#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "flowda/data/basin.hpp"

// Canonical on-disk schema:
//   <basin_id>.csv   header `date,<dyn_1>,...,<dyn_k>,streamflow`
//   static.csv       header `basin_id,<attr_1>,...`
// UTF-8, comma separated, '.' decimal point, empty cell = missing.

namespace flowda {

enum class DataErrorKind {
  kMissingFile,
  kMalformedHeader,
  kMalformedRow,
  kNonMonotoneDates,
  kDateGap,
  kMissingStatic,
  kIo,
};

inline const char* to_string(DataErrorKind kind) {
  switch (kind) {
    case DataErrorKind::kMissingFile: return "missing file";
    case DataErrorKind::kMalformedHeader: return "malformed header";
    case DataErrorKind::kMalformedRow: return "malformed row";
    case DataErrorKind::kNonMonotoneDates: return "non-monotone dates";
    case DataErrorKind::kDateGap: return "date gap";
    case DataErrorKind::kMissingStatic: return "missing static attributes";
    case DataErrorKind::kIo: return "i/o error";
  }
  return "data error";
}

class DataError : public std::runtime_error {
 public:
  DataError(DataErrorKind kind, std::string path, std::size_t row, const std::string& detail)
      : std::runtime_error(path + (row ? ":" + std::to_string(row) : std::string()) + ": " + to_string(kind) + ": " +
                           detail),
        kind_(kind),
        path_(std::move(path)),
        row_(row) {}

  DataErrorKind kind() const { return kind_; }
  const std::string& path() const { return path_; }
  /// 1-based line number in the file (the header is line 1); 0 when not row specific.
  std::size_t row() const { return row_; }

 private:
  DataErrorKind kind_;
  std::string path_;
  std::size_t row_;
};

struct CsvSchema {
  std::vector<std::string> dynamic_columns;  // empty: take every column between date and streamflow
  std::string streamflow_column = "streamflow";
  int forward_fill_limit = 3;                // days
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::optional<double> parse_number(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

inline std::string number_text(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw DataError(DataErrorKind::kMissingFile, path.string(), 0, "not found");
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorKind::kIo, path.string(), 0, "cannot open for reading");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataErrorKind::kIo, path.string(), 0, "cannot open for writing");
  return out;
}

}  // namespace detail

/**
 * Loads one basin file. The basin id is the file stem.
 *
 * Missing or unparseable streamflow becomes mask 0. A missing dynamic value
 * is forward-filled for up to `forward_fill_limit` consecutive days; beyond
 * that (or with no earlier value) the row is flagged invalid.
 */
inline BasinSeries load_basin_csv(const std::filesystem::path& path, const CsvSchema& schema = {}) {
  auto in = detail::open_input(path);
  const std::string where = path.string();
  std::string line;
  if (!std::getline(in, line)) throw DataError(DataErrorKind::kMalformedHeader, where, 1, "empty file");
  auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header.front() != "date" || header.back() != schema.streamflow_column) {
    throw DataError(DataErrorKind::kMalformedHeader, where, 1,
                    "expected 'date,<features...>," + schema.streamflow_column + "'");
  }
  std::vector<std::string> file_features(header.begin() + 1, header.end() - 1);
  std::vector<std::size_t> columns;  // cell index for each selected feature
  BasinSeries series;
  series.basin_id = path.stem().string();
  if (schema.dynamic_columns.empty()) {
    series.dynamic_names = file_features;
    for (std::size_t i = 0; i < file_features.size(); ++i) columns.push_back(i + 1);
  } else {
    for (const auto& name : schema.dynamic_columns) {
      auto it = std::find(file_features.begin(), file_features.end(), name);
      if (it == file_features.end()) throw DataError(DataErrorKind::kMalformedHeader, where, 1, "missing column " + name);
      columns.push_back(static_cast<std::size_t>(it - file_features.begin()) + 1);
    }
    series.dynamic_names = schema.dynamic_columns;
  }
  const std::size_t width = columns.size();
  std::vector<double> last_value(width, 0.0);
  std::vector<int> have_value(width, 0);
  std::vector<int> gap_run(width, 0);

  std::size_t line_no = 1;
  std::optional<Date> previous;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(DataErrorKind::kMalformedRow, where, line_no,
                      "expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    auto date = try_parse_date(cells.front());
    if (!date) throw DataError(DataErrorKind::kMalformedRow, where, line_no, "bad date '" + cells.front() + "'");
    if (previous) {
      if (*date <= *previous) throw DataError(DataErrorKind::kNonMonotoneDates, where, line_no, format_date(*date));
      if (*date != *previous + std::chrono::days{1}) {
        throw DataError(DataErrorKind::kDateGap, where, line_no, "missing days before " + format_date(*date));
      }
    } else {
      series.start = *date;
    }
    previous = date;

    bool row_valid = true;
    for (std::size_t f = 0; f < width; ++f) {
      const auto& cell = cells[columns[f]];
      auto value = detail::parse_number(cell);
      if (!value && !cell.empty()) {
        throw DataError(DataErrorKind::kMalformedRow, where, line_no, "non-numeric value '" + cell + "'");
      }
      if (value) {
        last_value[f] = *value;
        have_value[f] = 1;
        gap_run[f] = 0;
      } else {
        ++gap_run[f];
        if (!have_value[f] || gap_run[f] > schema.forward_fill_limit) row_valid = false;
      }
      series.dynamic.push_back(last_value[f]);
    }
    series.dynamic_valid.push_back(row_valid ? 1 : 0);
    auto flow = detail::parse_number(cells.back());
    series.streamflow.push_back(flow.value_or(0.0));
    series.mask.push_back(flow ? 1 : 0);
  }
  return series;
}

inline void write_basin_csv(const std::filesystem::path& path, const BasinSeries& series) {
  series.validate();
  auto out = detail::open_output(path);
  out << "date";
  for (const auto& n : series.dynamic_names) out << ',' << n;
  out << ",streamflow\n";
  for (std::size_t i = 0; i < series.length(); ++i) {
    out << format_date(series.date(i));
    for (double v : series.dynamic_row(i)) out << ',' << detail::number_text(v);
    out << ',';
    if (series.mask[i]) out << detail::number_text(series.streamflow[i]);
    out << '\n';
  }
  if (!out) throw DataError(DataErrorKind::kIo, path.string(), 0, "write failed");
}

inline StaticTable load_static_csv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  const std::string where = path.string();
  std::string line;
  if (!std::getline(in, line)) throw DataError(DataErrorKind::kMalformedHeader, where, 1, "empty file");
  auto header = detail::split_csv_line(line);
  if (header.empty() || header.front() != "basin_id") {
    throw DataError(DataErrorKind::kMalformedHeader, where, 1, "expected 'basin_id,<attributes...>'");
  }
  StaticTable table;
  table.names.assign(header.begin() + 1, header.end());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size() || cells.front().empty()) {
      throw DataError(DataErrorKind::kMalformedRow, where, line_no, "wrong cell count or empty basin id");
    }
    StaticAttributes row{cells.front(), {}};
    for (std::size_t i = 1; i < cells.size(); ++i) {
      auto v = detail::parse_number(cells[i]);
      if (!v) throw DataError(DataErrorKind::kMalformedRow, where, line_no, "non-numeric attribute '" + cells[i] + "'");
      row.values.push_back(*v);
    }
    if (table.find(row.basin_id)) throw DataError(DataErrorKind::kMalformedRow, where, line_no, "duplicate basin " + row.basin_id);
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline void write_static_csv(const std::filesystem::path& path, const StaticTable& table) {
  auto out = detail::open_output(path);
  out << "basin_id";
  for (const auto& n : table.names) out << ',' << n;
  out << '\n';
  for (const auto& r : table.rows) {
    out << r.basin_id;
    for (double v : r.values) out << ',' << detail::number_text(v);
    out << '\n';
  }
  if (!out) throw DataError(DataErrorKind::kIo, path.string(), 0, "write failed");
}

/// Loads every `<basin_id>.csv` in `dir` (sorted by id) plus `static.csv`.
inline DomainData load_domain(const std::filesystem::path& dir, const CsvSchema& schema = {}) {
  if (!std::filesystem::is_directory(dir)) throw DataError(DataErrorKind::kMissingFile, dir.string(), 0, "not a directory");
  DomainData data;
  data.statics = load_static_csv(dir / "static.csv");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv" && entry.path().filename() != "static.csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto series = load_basin_csv(f, schema);
    if (!data.statics.find(series.basin_id)) {
      throw DataError(DataErrorKind::kMissingStatic, (dir / "static.csv").string(), 0, "no row for basin " + series.basin_id);
    }
    if (!data.basins.empty() && series.dynamic_names != data.basins.front().dynamic_names) {
      throw DataError(DataErrorKind::kMalformedHeader, f.string(), 1, "feature columns differ from other basins");
    }
    data.basins.push_back(std::move(series));
  }
  return data;
}

inline void write_domain(const std::filesystem::path& dir, const DomainData& data) {
  std::filesystem::create_directories(dir);
  for (const auto& b : data.basins) write_basin_csv(dir / (b.basin_id + ".csv"), b);
  write_static_csv(dir / "static.csv", data.statics);
}

}  // namespace flowda
