#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/data/basin.hpp"

// Synthetic two-domain rainfall-runoff data. Each basin gets its own RNG
// stream derived from (seed, domain, index), so output does not depend on
// generation order.

namespace flowda {

struct SynthConfig {
  std::size_t n_source_basins = 20;
  std::size_t n_target_basins = 8;
  std::size_t length_days = 4383;  // 1988-10-01 .. 2000-09-30
  double shift_strength = 0.5;
  double missing_rate = 0.1;       // target streamflow only
  double source_missing_rate = 0.0;
  double flow_noise = 0.05;        // multiplicative, uniform in [-noise, noise]
  std::uint64_t seed = 0;
  Date start = parse_date("1988-10-01");

  void validate() const {
    if (n_source_basins == 0 || n_target_basins == 0) throw std::invalid_argument("synth: basin counts must be positive");
    if (length_days == 0) throw std::invalid_argument("synth: length_days must be positive");
    if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw std::invalid_argument("synth: missing_rate must be in [0, 1)");
    if (!(source_missing_rate >= 0.0 && source_missing_rate < 1.0)) {
      throw std::invalid_argument("synth: source_missing_rate must be in [0, 1)");
    }
    if (!(shift_strength >= 0.0)) throw std::invalid_argument("synth: shift_strength must be >= 0");
    if (!(flow_noise >= 0.0 && flow_noise < 1.0)) throw std::invalid_argument("synth: flow_noise must be in [0, 1)");
  }
};

enum class SynthDomain : std::uint32_t { kSource = 0, kTarget = 1 };

/// Hidden parameters and mass totals of one generated basin.
struct SynthTruth {
  std::string basin_id;
  double k = 0.0;
  double initial_storage = 0.0;
  double precip_total = 0.0;
  double flow_total = 0.0;  // before masking
};

struct SynthDataset {
  DomainData source;
  DomainData target;
  std::vector<SynthTruth> source_truth;
  std::vector<SynthTruth> target_truth;
};

inline const std::vector<std::string>& synth_dynamic_names() {
  static const std::vector<std::string> names{"prcp", "tmin", "tmax", "vp"};
  return names;
}

inline const std::vector<std::string>& synth_static_names() {
  static const std::vector<std::string> names{"p_mean", "t_mean", "drainage", "area_index"};
  return names;
}

namespace detail {

inline std::mt19937_64 basin_stream(std::uint64_t seed, SynthDomain domain, std::size_t index, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(domain), static_cast<std::uint32_t>(index), purpose};
  return std::mt19937_64(seq);
}

/// Saturation vapour pressure in Pa (Tetens).
inline double tetens_pa(double celsius) { return 610.78 * std::exp(17.27 * celsius / (celsius + 237.3)); }

inline std::string synth_basin_id(SynthDomain domain, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04zu", domain == SynthDomain::kSource ? "S" : "T", index + 1);
  return buf;
}

}  // namespace detail

/**
 * One basin. Precipitation follows a seasonal two-state Markov chain with
 * exponential amounts; temperature is a seasonal cycle plus AR(1) anomaly.
 * Storage obeys S[t+1] = S[t] + P[t] - k S[t] and flow is k S[t] times
 * (1 + noise), so flows are non-negative and sum to at most the water put in.
 */
inline SynthTruth synth_basin(const SynthConfig& config, SynthDomain domain, std::size_t index, BasinSeries& series,
                              StaticAttributes& statics) {
  const double s = domain == SynthDomain::kTarget ? config.shift_strength : 0.0;
  auto rng = detail::basin_stream(config.seed, domain, index, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double wet_base = uniform(0.30, 0.45) * (1.0 - 0.3 * s);
  const double wet_amount = uniform(4.0, 8.0) * (1.0 - 0.2 * s);
  const double season_phase = uniform(-0.3, 0.3) + std::numbers::pi * s;
  const double t_mean = uniform(5.0, 15.0) + 4.0 * s;
  const double t_amplitude = uniform(6.0, 10.0);
  const double k = std::clamp(uniform(0.05, 0.25) + 0.15 * s, 0.01, 0.95);
  const double area_index = uniform(0.0, 1.0);

  SynthTruth truth;
  truth.basin_id = detail::synth_basin_id(domain, index);
  truth.k = k;
  const double p_climate = wet_base * wet_amount;
  truth.initial_storage = p_climate / k;

  series = BasinSeries{};
  series.basin_id = truth.basin_id;
  series.start = config.start;
  series.dynamic_names = synth_dynamic_names();
  series.dynamic.reserve(config.length_days * 4);

  const std::chrono::year_month_day first{config.start};
  const int first_doy = (config.start - std::chrono::sys_days{first.year() / std::chrono::January / 1}).count();
  bool wet = false;
  double anomaly = 0.0;
  double storage = truth.initial_storage;
  std::vector<double> flows(config.length_days);
  for (std::size_t t = 0; t < config.length_days; ++t) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(first_doy + static_cast<int>(t)) / 365.25;
    const double p_wet = std::clamp(wet_base * (1.0 + 0.5 * std::sin(phi + season_phase)) + (wet ? 0.25 : 0.0), 0.02, 0.95);
    wet = unit(rng) < p_wet;
    const double precip = wet ? -wet_amount * std::log(1.0 - unit(rng)) : 0.0;
    anomaly = 0.7 * anomaly + 2.0 * gauss(rng);
    const double temp = t_mean - t_amplitude * std::cos(phi) + anomaly;
    const double tmin = temp - 5.0 - 0.5 * unit(rng);
    const double tmax = temp + 5.0 + 0.5 * unit(rng);
    series.dynamic.insert(series.dynamic.end(), {precip, tmin, tmax, detail::tetens_pa(tmin)});

    const double release = k * storage;
    flows[t] = release * (1.0 + config.flow_noise * (2.0 * unit(rng) - 1.0));
    storage += precip - release;
    truth.precip_total += precip;
    truth.flow_total += flows[t];
  }

  const double rate = domain == SynthDomain::kTarget ? config.missing_rate : config.source_missing_rate;
  auto mask_rng = detail::basin_stream(config.seed, domain, index, 1);
  series.dynamic_valid.assign(config.length_days, 1);
  series.streamflow = std::move(flows);
  series.mask.resize(config.length_days);
  for (std::size_t t = 0; t < config.length_days; ++t) {
    const bool missing = unit(mask_rng) < rate;
    series.mask[t] = missing ? 0 : 1;
    if (missing) series.streamflow[t] = 0.0;
  }

  statics.basin_id = truth.basin_id;
  statics.values = {p_climate, t_mean, k + 0.01 * gauss(rng), area_index};
  return truth;
}

inline SynthDataset synth_generate(const SynthConfig& config) {
  config.validate();
  SynthDataset out;
  auto build = [&](SynthDomain domain, std::size_t count, DomainData& data, std::vector<SynthTruth>& truth) {
    data.statics.names = synth_static_names();
    data.basins.resize(count);
    data.statics.rows.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      truth.push_back(synth_basin(config, domain, i, data.basins[i], data.statics.rows[i]));
    }
  };
  build(SynthDomain::kSource, config.n_source_basins, out.source, out.source_truth);
  build(SynthDomain::kTarget, config.n_target_basins, out.target, out.target_truth);
  return out;
}

}  // namespace flowda
