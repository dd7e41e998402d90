#pragma once

#include <boost/crc.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowda/data/normalize.hpp"
#include "flowda/io/binary.hpp"
#include "flowda/model/domain.hpp"
#include "flowda/training/config.hpp"
#include "flowda/training/log.hpp"
#include "flowda/training/optim.hpp"

// File layout: "FDCK", u32 version, u64 payload length, payload, u32 CRC-32
// of the payload. Integers and doubles are little-endian.

namespace flowda {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Payload damaged or cut short.
class CheckpointChecksumError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Written by an incompatible format version.
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedValues {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

inline std::vector<NamedValues> snapshot(const std::vector<NamedTensor>& params) {
  std::vector<NamedValues> out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) out.push_back({name, t.shape(), {t.data().begin(), t.data().end()}});
  return out;
}

/// Copies values into `params` by name. Everything is checked before the
/// first write, so a mismatch leaves `params` untouched.
inline void assign(std::vector<NamedTensor> params, const std::vector<NamedValues>& values) {
  if (params.size() != values.size()) {
    throw CheckpointError("expected " + std::to_string(params.size()) + " parameter tensors, found " +
                          std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].first != values[i].name || params[i].second.shape() != values[i].shape ||
        values[i].values.size() != params[i].second.numel()) {
      throw CheckpointError("parameter " + values[i].name + " " + shape_string(values[i].shape) +
                            " does not match model parameter " + params[i].first + " " +
                            shape_string(params[i].second.shape()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].second.mutable_data();
    std::copy(values[i].values.begin(), values[i].values.end(), dst.begin());
  }
}

struct Checkpoint {
  TrainConfig config;
  std::string label_convention = kLabelConvention;
  std::uint64_t architecture_hash = 0;
  std::vector<std::string> dynamic_columns;
  std::vector<std::string> static_columns;
  NormStats source_stats;
  NormStats target_stats;
  std::vector<NamedValues> parameters;
  std::vector<NamedValues> best_parameters;
  std::vector<std::pair<std::string, AdamState>> optimizers;
  std::string phase;
  std::uint64_t epochs_completed = 0;
  std::uint64_t phase_epoch = 0;
  double best_val = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t best_epoch = 0;
  std::string rng_state;
  std::vector<TrainLogEntry> log;
};

namespace detail {

inline void put_strings(io::LeWriter& w, const std::vector<std::string>& v) {
  w.put<std::uint64_t>(v.size());
  for (const auto& s : v) w.put_string(s);
}

inline void put_channel(io::LeWriter& w, const ChannelStats& c) {
  w.put_doubles(c.mean);
  w.put_doubles(c.std);
  w.put_bytes(c.constant);
}

inline void put_stats(io::LeWriter& w, const NormStats& s) {
  put_channel(w, s.dynamic);
  put_channel(w, s.statics);
  w.put(s.flow_mean);
  w.put(s.flow_std);
  w.put<std::uint8_t>(s.flow_constant ? 1 : 0);
}

inline void put_values(io::LeWriter& w, const std::vector<NamedValues>& v) {
  w.put<std::uint64_t>(v.size());
  for (const auto& t : v) {
    w.put_string(t.name);
    w.put<std::uint64_t>(t.shape.size());
    for (auto d : t.shape) w.put<std::uint64_t>(d);
    w.put_doubles(t.values);
  }
}

inline void put_adam(io::LeWriter& w, const AdamState& a) {
  w.put(a.beta1);
  w.put(a.beta2);
  w.put(a.epsilon);
  w.put<std::uint64_t>(a.step);
  w.put<std::uint64_t>(a.m.size());
  for (std::size_t i = 0; i < a.m.size(); ++i) {
    w.put_doubles(a.m[i]);
    w.put_doubles(a.v[i]);
  }
}

class PayloadReader {
 public:
  explicit PayloadReader(std::istream& is) : r_(is) {}

  template <typename T>
  T get() {
    return r_.get<T>();
  }
  std::string string() { return r_.get_string(); }
  std::vector<double> doubles() { return r_.get_doubles(); }
  std::vector<std::uint8_t> bytes() { return r_.get_bytes(); }

  std::size_t count() {
    const auto n = get<std::uint64_t>();
    if (n > (std::uint64_t{1} << 32)) throw CheckpointChecksumError("checkpoint record count is implausible");
    return static_cast<std::size_t>(n);
  }

  std::vector<std::string> strings() {
    std::vector<std::string> v(count());
    for (auto& s : v) s = string();
    return v;
  }

  ChannelStats channel() {
    ChannelStats c;
    c.mean = doubles();
    c.std = doubles();
    c.constant = bytes();
    return c;
  }

  NormStats stats() {
    NormStats s;
    s.dynamic = channel();
    s.statics = channel();
    s.flow_mean = get<double>();
    s.flow_std = get<double>();
    s.flow_constant = get<std::uint8_t>() != 0;
    return s;
  }

  std::vector<NamedValues> values() {
    std::vector<NamedValues> v(count());
    for (auto& t : v) {
      t.name = string();
      t.shape.resize(count());
      for (auto& d : t.shape) d = static_cast<std::size_t>(get<std::uint64_t>());
      t.values = doubles();
      if (t.values.size() != shape_numel(t.shape)) throw CheckpointError("tensor " + t.name + " is inconsistent");
    }
    return v;
  }

  AdamState adam() {
    AdamState a;
    a.beta1 = get<double>();
    a.beta2 = get<double>();
    a.epsilon = get<double>();
    a.step = get<std::uint64_t>();
    const std::size_t n = count();
    a.m.resize(n);
    a.v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      a.m[i] = doubles();
      a.v[i] = doubles();
    }
    return a;
  }

 private:
  io::LeReader<CheckpointChecksumError> r_;
};

inline std::uint32_t crc32(const std::string& bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& c) {
  std::ostringstream payload(std::ios::binary);
  io::LeWriter w(payload);
  w.put_string(config_text(c.config));
  w.put_string(c.label_convention);
  w.put(c.architecture_hash);
  detail::put_strings(w, c.dynamic_columns);
  detail::put_strings(w, c.static_columns);
  detail::put_stats(w, c.source_stats);
  detail::put_stats(w, c.target_stats);
  detail::put_values(w, c.parameters);
  detail::put_values(w, c.best_parameters);
  w.put<std::uint64_t>(c.optimizers.size());
  for (const auto& [name, state] : c.optimizers) {
    w.put_string(name);
    detail::put_adam(w, state);
  }
  w.put_string(c.phase);
  w.put(c.epochs_completed);
  w.put(c.phase_epoch);
  w.put(c.best_val);
  w.put(c.best_epoch);
  w.put_string(c.rng_state);
  w.put<std::uint64_t>(c.log.size());
  for (const auto& e : c.log) w.put_string(to_json(e).dump());

  const std::string body = payload.str();
  std::ostringstream file(std::ios::binary);
  file.write("FDCK", 4);
  io::LeWriter fw(file);
  fw.put(kCheckpointVersion);
  fw.put<std::uint64_t>(body.size());
  file.write(body.data(), static_cast<std::streamsize>(body.size()));
  fw.put(detail::crc32(body));
  return file.str();
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "FDCK", 4) != 0) throw CheckpointError("not a checkpoint file");
  io::LeReader<CheckpointChecksumError> head(is);
  const auto version = head.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  const auto length = head.get<std::uint64_t>();
  const std::size_t offset = 4 + 4 + 8;
  if (bytes.size() < offset || length != bytes.size() - offset - 4) {
    throw CheckpointChecksumError("checkpoint is truncated or has trailing data");
  }
  const std::string body = bytes.substr(offset, static_cast<std::size_t>(length));
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + offset + length, 4);
  if (io::to_little(stored) != detail::crc32(body)) throw CheckpointChecksumError("checkpoint checksum mismatch");

  std::istringstream ps(body, std::ios::binary);
  detail::PayloadReader r(ps);
  Checkpoint c;
  try {
    c.config = parse_config_text(r.string());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  c.label_convention = r.string();
  c.architecture_hash = r.get<std::uint64_t>();
  c.dynamic_columns = r.strings();
  c.static_columns = r.strings();
  c.source_stats = r.stats();
  c.target_stats = r.stats();
  c.parameters = r.values();
  c.best_parameters = r.values();
  const std::size_t groups = r.count();
  for (std::size_t i = 0; i < groups; ++i) {
    std::string name = r.string();
    c.optimizers.emplace_back(std::move(name), r.adam());
  }
  c.phase = r.string();
  c.epochs_completed = r.get<std::uint64_t>();
  c.phase_epoch = r.get<std::uint64_t>();
  c.best_val = r.get<double>();
  c.best_epoch = r.get<std::uint64_t>();
  c.rng_state = r.string();
  const std::size_t entries = r.count();
  for (std::size_t i = 0; i < entries; ++i) c.log.push_back(log_entry_from_json(nlohmann::json::parse(r.string())));
  if (c.label_convention != kLabelConvention) {
    throw CheckpointError("checkpoint uses domain labels '" + c.label_convention + "', expected '" +
                          std::string(kLabelConvention) + "'");
  }
  return c;
}

/// Writes to a sibling temporary file and renames it into place.
inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const std::string bytes = encode_checkpoint(c);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot write " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw CheckpointError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace flowda
