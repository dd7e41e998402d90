#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/data/windows.hpp"
#include "flowda/io/binary.hpp"

// Binary window cache: "FDWC" magic, u32 version, u64 count, then records.
// All integers and doubles are little-endian.

namespace flowda {

class WindowCacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kWindowCacheVersion = 1;

inline void write_window_cache(const std::filesystem::path& path, const std::vector<WindowSample>& windows) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw WindowCacheError("cannot write " + path.string());
  os.write("FDWC", 4);
  io::LeWriter w(os);
  w.put(kWindowCacheVersion);
  w.put<std::uint64_t>(windows.size());
  for (const auto& s : windows) {
    w.put_string(s.basin_id);
    w.put<std::int64_t>(s.target_date.time_since_epoch().count());
    w.put<std::uint64_t>(s.history_length);
    w.put<std::uint64_t>(s.horizon);
    w.put<std::uint64_t>(s.dynamic_width);
    w.put_doubles(s.history);
    w.put_doubles(s.statics);
    w.put(s.last_observed_y);
    w.put_doubles(s.targets);
    w.put_bytes(s.target_mask);
    w.put(s.flow_variance);
  }
  if (!os) throw WindowCacheError("write failed: " + path.string());
}

inline std::vector<WindowSample> read_window_cache(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw WindowCacheError("cannot read " + path.string());
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "FDWC", 4) != 0) throw WindowCacheError("not a window cache: " + path.string());
  io::LeReader<WindowCacheError> r(is);
  const auto version = r.get<std::uint32_t>();
  if (version != kWindowCacheVersion) {
    throw WindowCacheError("window cache version " + std::to_string(version) + " is not supported");
  }
  const auto count = r.get<std::uint64_t>();
  std::vector<WindowSample> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    WindowSample s;
    s.basin_id = r.get_string();
    s.target_date = Date{std::chrono::days{r.get<std::int64_t>()}};
    s.history_length = r.get<std::uint64_t>();
    s.horizon = r.get<std::uint64_t>();
    s.dynamic_width = r.get<std::uint64_t>();
    s.history = r.get_doubles();
    s.statics = r.get_doubles();
    s.last_observed_y = r.get<double>();
    s.targets = r.get_doubles();
    s.target_mask = r.get_bytes();
    s.flow_variance = r.get<double>();
    if (s.history.size() != s.history_length * s.dynamic_width || s.targets.size() != s.horizon ||
        s.target_mask.size() != s.horizon) {
      throw WindowCacheError("window cache record " + std::to_string(i) + " is inconsistent");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace flowda
