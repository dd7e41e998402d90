#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

// Little-endian primitives shared by the window cache and checkpoints.

namespace flowda::io {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class LeWriter {
 public:
  explicit LeWriter(std::ostream& os) : os_(os) {}
  template <typename T>
  void put(T v) {
    v = to_little(v);
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void put_doubles(const std::vector<double>& v) {
    put<std::uint64_t>(v.size());
    for (double x : v) put(x);
  }
  void put_bytes(const std::vector<std::uint8_t>& v) {
    put<std::uint64_t>(v.size());
    os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size()));
  }

 private:
  std::ostream& os_;
};

/// Reader that throws `Error` (constructible from a string) on short input.
template <typename Error>
class LeReader {
 public:
  explicit LeReader(std::istream& is) : is_(is) {}
  template <typename T>
  T get() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is_) throw Error("unexpected end of data");
    return to_little(v);
  }
  std::string get_string() {
    auto n = checked_count(get<std::uint64_t>(), 1);
    std::string s(n, '\0');
    is_.read(s.data(), static_cast<std::streamsize>(n));
    if (!is_) throw Error("unexpected end of data");
    return s;
  }
  std::vector<double> get_doubles() {
    auto n = checked_count(get<std::uint64_t>(), sizeof(double));
    std::vector<double> v(n);
    for (auto& x : v) x = get<double>();
    return v;
  }
  std::vector<std::uint8_t> get_bytes() {
    auto n = checked_count(get<std::uint64_t>(), 1);
    std::vector<std::uint8_t> v(n);
    is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n));
    if (!is_) throw Error("unexpected end of data");
    return v;
  }

 private:
  static std::size_t checked_count(std::uint64_t n, std::size_t width) {
    if (n > (std::uint64_t{1} << 40) / width) throw Error("record length is implausible");
    return static_cast<std::size_t>(n);
  }
  std::istream& is_;
};

}  // namespace flowda::io
