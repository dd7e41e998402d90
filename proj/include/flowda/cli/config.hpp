#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowda/data/csv.hpp"
#include "flowda/data/split.hpp"
#include "flowda/data/synth.hpp"
#include "flowda/training/config.hpp"

// Experiment configuration file: INI sections [data], [model], [training],
// [synth] and [output]. Unknown sections and keys are errors.

namespace flowda {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DataConfig {
  std::filesystem::path source_dir;
  std::filesystem::path target_dir;
  std::vector<std::string> dynamic_columns;  // empty: every non-date column except streamflow
  std::string streamflow_column = "streamflow";
  std::size_t forward_fill_limit = 3;
  SplitRanges ranges = SplitRanges::defaults();
  std::size_t validation_stride = 1;
  std::size_t test_stride = 1;

  CsvSchema schema() const { return {dynamic_columns, streamflow_column, static_cast<int>(forward_fill_limit)}; }
};

struct ExperimentConfig {
  DataConfig data;
  TrainConfig train;
  SynthConfig synth;
  std::filesystem::path output_dir = "flowda_out";
  std::size_t runs = 1;
};

namespace detail {

inline const std::vector<std::string>& model_keys() {
  static const std::vector<std::string> keys{"hidden_size", "embedding_width", "attention_width", "latent_width",
                                             "discriminator_hidden", "scoring", "dropout", "history", "horizon"};
  return keys;
}

inline bool is_model_key(const std::string& key) {
  for (const auto& k : model_keys()) {
    if (k == key) return true;
  }
  return false;
}

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

inline std::size_t config_uint(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_uint_value(key, value));
}

}  // namespace detail

/// Sets `section.key`. Throws ConfigError naming the key on any problem.
inline void set_experiment_value(ExperimentConfig& c, const std::string& section, const std::string& key,
                                 const std::string& value) {
  const std::string where = section + "." + key;
  try {
    if (section == "model" || section == "training") {
      if (section == "model" && !detail::is_model_key(key)) throw ConfigError("unknown key " + where);
      if (section == "training" && key == "runs") {
        c.runs = detail::config_uint(where, value);
        return;
      }
      if (section == "training" && detail::is_model_key(key)) throw ConfigError("unknown key " + where);
      if (!set_config_entry(c.train, key, value)) throw ConfigError("unknown key " + where);
    } else if (section == "data") {
      auto& d = c.data;
      auto date = [&] { return parse_date(value); };
      if (key == "source_dir") d.source_dir = value;
      else if (key == "target_dir") d.target_dir = value;
      else if (key == "dynamic_columns") d.dynamic_columns = detail::split_list(value);
      else if (key == "streamflow_column") d.streamflow_column = value;
      else if (key == "forward_fill_limit") d.forward_fill_limit = detail::config_uint(where, value);
      else if (key == "train_start") d.ranges.train.first = date();
      else if (key == "train_end") d.ranges.train.last = date();
      else if (key == "validation_start") d.ranges.validation.first = date();
      else if (key == "validation_end") d.ranges.validation.last = date();
      else if (key == "test_start") d.ranges.test.first = date();
      else if (key == "test_end") d.ranges.test.last = date();
      else if (key == "validation_stride") d.validation_stride = detail::config_uint(where, value);
      else if (key == "test_stride") d.test_stride = detail::config_uint(where, value);
      else throw ConfigError("unknown key " + where);
    } else if (section == "synth") {
      auto& s = c.synth;
      auto num = [&] { return detail::parse_double_value(where, value); };
      if (key == "n_source_basins") s.n_source_basins = detail::config_uint(where, value);
      else if (key == "n_target_basins") s.n_target_basins = detail::config_uint(where, value);
      else if (key == "length_days") s.length_days = detail::config_uint(where, value);
      else if (key == "shift_strength") s.shift_strength = num();
      else if (key == "missing_rate") s.missing_rate = num();
      else if (key == "source_missing_rate") s.source_missing_rate = num();
      else if (key == "flow_noise") s.flow_noise = num();
      else if (key == "seed") s.seed = detail::parse_uint_value(where, value);
      else if (key == "start") s.start = parse_date(value);
      else throw ConfigError("unknown key " + where);
    } else if (section == "output") {
      if (key == "dir") c.output_dir = value;
      else throw ConfigError("unknown key " + where);
    } else {
      throw ConfigError("unknown section [" + section + "]");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline void validate(const ExperimentConfig& c) {
  try {
    c.train.validate();
    c.data.ranges.validate();
    c.synth.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.runs < 1) throw ConfigError("training.runs must be >= 1");
  if (c.data.validation_stride < 1 || c.data.test_stride < 1) throw ConfigError("strides must be >= 1");
}

inline ExperimentConfig parse_experiment_config(std::istream& is, const std::string& origin = "config") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError(origin + ": key '" + section + "' outside a section");
    for (const auto& [key, value] : body) set_experiment_value(c, section, key, value.data());
  }
  return c;
}

/// Relative data directories in the file are taken relative to the file itself.
inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  auto c = parse_experiment_config(is, path.string());
  for (auto* dir : {&c.data.source_dir, &c.data.target_dir}) {
    if (!dir->empty() && dir->is_relative()) *dir = (path.parent_path() / *dir).lexically_normal();
  }
  return c;
}

/// Fully resolved configuration in the same INI format.
inline std::string experiment_config_text(const ExperimentConfig& c) {
  using detail::shortest;
  std::ostringstream os;
  const auto& d = c.data;
  os << "[data]\n"
     << "source_dir=" << d.source_dir.string() << "\n"
     << "target_dir=" << d.target_dir.string() << "\n"
     << "dynamic_columns=" << detail::join(d.dynamic_columns) << "\n"
     << "streamflow_column=" << d.streamflow_column << "\n"
     << "forward_fill_limit=" << d.forward_fill_limit << "\n"
     << "train_start=" << format_date(d.ranges.train.first) << "\n"
     << "train_end=" << format_date(d.ranges.train.last) << "\n"
     << "validation_start=" << format_date(d.ranges.validation.first) << "\n"
     << "validation_end=" << format_date(d.ranges.validation.last) << "\n"
     << "test_start=" << format_date(d.ranges.test.first) << "\n"
     << "test_end=" << format_date(d.ranges.test.last) << "\n"
     << "validation_stride=" << d.validation_stride << "\n"
     << "test_stride=" << d.test_stride << "\n";
  std::ostringstream model, training;
  for (const auto& [k, v] : config_entries(c.train)) (detail::is_model_key(k) ? model : training) << k << "=" << v << "\n";
  training << "runs=" << c.runs << "\n";
  os << "\n[model]\n" << model.str() << "\n[training]\n" << training.str();
  const auto& s = c.synth;
  os << "\n[synth]\n"
     << "n_source_basins=" << s.n_source_basins << "\n"
     << "n_target_basins=" << s.n_target_basins << "\n"
     << "length_days=" << s.length_days << "\n"
     << "shift_strength=" << shortest(s.shift_strength) << "\n"
     << "missing_rate=" << shortest(s.missing_rate) << "\n"
     << "source_missing_rate=" << shortest(s.source_missing_rate) << "\n"
     << "flow_noise=" << shortest(s.flow_noise) << "\n"
     << "seed=" << s.seed << "\n"
     << "start=" << format_date(s.start) << "\n";
  os << "\n[output]\ndir=" << c.output_dir.string() << "\n";
  return os.str();
}

}  // namespace flowda
