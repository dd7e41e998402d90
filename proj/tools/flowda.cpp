#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "flowda/cli/config.hpp"
#include "flowda/data.hpp"
#include "flowda/metrics.hpp"
#include "flowda/training.hpp"

namespace fs = std::filesystem;
using namespace flowda;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

// Refuses a second command on the same output directory.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / ".flowda.lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      throw ConfigError("output directory " + dir.string() + " is locked by another flowda command (remove " +
                        path_.string() + " if it is stale)");
    }
    std::fclose(f);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw DataError(DataErrorKind::kIo, path.string(), 0, "write failed");
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// A command-line flag that overrides one `section.key` of the config file.
struct Binding {
  std::string section;
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

class Overrides {
 public:
  void add(CLI::App* cmd, const std::string& section, const std::string& key, const std::string& fallback,
           const std::string& help) {
    auto& b = bindings_.emplace_back(Binding{section, key, {}, nullptr});
    std::string flag = "--" + key;
    for (auto& ch : flag) ch = ch == '_' ? '-' : ch;
    b.option = cmd->add_option(flag, b.value, help)->default_str(fallback)->type_name(type_of(key, fallback));
  }

  void apply(ExperimentConfig& c) const {
    for (const auto& b : bindings_) {
      if (b.option->count() == 0) continue;
      try {
        set_experiment_value(c, b.section, b.key, b.value);
      } catch (const ConfigError& e) {
        throw ConfigError(b.option->get_name() + ": " + e.what());
      }
    }
  }

 private:
  static std::string type_of(const std::string& key, const std::string& fallback) {
    if (key.ends_with("_dir")) return "DIR";
    if (key == "mode" || key == "scoring") return "NAME";
    if (key == "start") return "DATE";
    static const std::vector<std::string> floats{"dropout",    "lambda",       "lr_first_epoch", "lr_rest",
                                                 "clip_norm",  "loss_epsilon", "shift_strength", "missing_rate",
                                                 "flow_noise", "source_missing_rate"};
    if (std::find(floats.begin(), floats.end(), key) != floats.end()) return "FLOAT";
    return fallback.empty() ? "TEXT" : "UINT";
  }

  std::deque<Binding> bindings_;
};

const std::map<std::string, std::string>& train_help() {
  static const std::map<std::string, std::string> help{
      {"mode", "adversarial, seq2seq_tl or lstm_tl"},
      {"hidden_size", "LSTM hidden units"},
      {"embedding_width", "input embedding width (0: hidden size)"},
      {"attention_width", "attention score width (0: hidden size)"},
      {"latent_width", "shared projection width"},
      {"discriminator_hidden", "discriminator hidden units"},
      {"scoring", "attention scoring: additive or dot"},
      {"dropout", "dropout rate on recurrent outputs"},
      {"lambda", "weight of the adversarial term"},
      {"lr_first_epoch", "learning rate in epoch 1"},
      {"lr_rest", "learning rate after epoch 1"},
      {"epochs", "training epochs (fine-tuning epochs for transfer baselines)"},
      {"pretrain_epochs", "source pretraining epochs for transfer baselines (0: same as epochs)"},
      {"batch_size", "windows per domain per step"},
      {"history", "history length N in days"},
      {"horizon", "forecast steps tau"},
      {"stride", "days between training windows"},
      {"clip_norm", "global gradient-norm clip per parameter group"},
      {"loss_epsilon", "NSE loss stabilizer"},
      {"seed", "seed of the first run; run i uses seed + i"},
  };
  return help;
}

void add_train_flags(CLI::App* cmd, Overrides& o) {
  const ExperimentConfig defaults;
  for (const auto& [key, value] : config_entries(defaults.train)) {
    o.add(cmd, detail::is_model_key(key) ? "model" : "training", key, value, train_help().at(key));
  }
  o.add(cmd, "training", "runs", std::to_string(defaults.runs), "independent runs with consecutive seeds");
}

void add_data_flags(CLI::App* cmd, Overrides& o, bool source) {
  const DataConfig d;
  if (source) o.add(cmd, "data", "source_dir", "", "source-domain directory (basin CSVs and static.csv)");
  o.add(cmd, "data", "target_dir", "", "target-domain directory (basin CSVs and static.csv)");
  o.add(cmd, "data", "validation_stride", std::to_string(d.validation_stride), "days between validation windows");
  o.add(cmd, "data", "test_stride", std::to_string(d.test_stride), "days between test windows");
}

void add_synth_flags(CLI::App* cmd, Overrides& o) {
  const SynthConfig s;
  o.add(cmd, "synth", "n_source_basins", std::to_string(s.n_source_basins), "source-domain basins");
  o.add(cmd, "synth", "n_target_basins", std::to_string(s.n_target_basins), "target-domain basins");
  o.add(cmd, "synth", "length_days", std::to_string(s.length_days), "days per basin");
  o.add(cmd, "synth", "shift_strength", detail::shortest(s.shift_strength), "size of the source/target shift");
  o.add(cmd, "synth", "missing_rate", detail::shortest(s.missing_rate), "fraction of target streamflow left empty");
  o.add(cmd, "synth", "source_missing_rate", detail::shortest(s.source_missing_rate),
        "fraction of source streamflow left empty");
  o.add(cmd, "synth", "flow_noise", detail::shortest(s.flow_noise), "multiplicative streamflow noise");
  o.add(cmd, "synth", "seed", std::to_string(s.seed), "generator seed");
  o.add(cmd, "synth", "start", format_date(s.start), "first date");
}

ExperimentConfig resolve(const std::string& config_path, const Overrides& o, const std::string& output) {
  ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_experiment_config(config_path);
  o.apply(c);
  if (!output.empty()) c.output_dir = output;
  validate(c);
  return c;
}

// Echoed configs live in another directory, so relative paths would not survive.
ExperimentConfig with_absolute_dirs(ExperimentConfig c) {
  for (auto* dir : {&c.data.source_dir, &c.data.target_dir}) {
    if (!dir->empty()) *dir = fs::absolute(*dir).lexically_normal();
  }
  return c;
}

nlohmann::json synth_json(const SynthConfig& s) {
  return {{"n_source_basins", s.n_source_basins}, {"n_target_basins", s.n_target_basins},
          {"length_days", s.length_days},         {"shift_strength", s.shift_strength},
          {"missing_rate", s.missing_rate},       {"source_missing_rate", s.source_missing_rate},
          {"flow_noise", s.flow_noise},           {"seed", s.seed},
          {"start", format_date(s.start)}};
}

int cmd_synth(ExperimentConfig c) {
  OutputLock lock(c.output_dir);
  const auto ds = synth_generate(c.synth);
  write_domain(c.output_dir / "source", ds.source);
  write_domain(c.output_dir / "target", ds.target);
  // The echoed config can be passed straight to `train`.
  const fs::path out = c.output_dir;
  c.data.source_dir = "source";
  c.data.target_dir = "target";
  c.output_dir = ExperimentConfig{}.output_dir;
  write_text(out / "config.ini", experiment_config_text(c));

  auto truth = [](const std::vector<SynthTruth>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& t : v) {
      out.push_back({{"basin_id", t.basin_id}, {"k", t.k}, {"initial_storage", t.initial_storage},
                     {"precip_total", t.precip_total}, {"flow_total", t.flow_total}});
    }
    return out;
  };
  write_json(out / "manifest.json", {{"command", "synth"},
                                              {"seed", c.synth.seed},
                                              {"config", synth_json(c.synth)},
                                              {"source", {{"dir", "source"}, {"basins", truth(ds.source_truth)}}},
                                              {"target", {{"dir", "target"}, {"basins", truth(ds.target_truth)}}}});
  std::cout << "wrote " << ds.source.basins.size() << " source and " << ds.target.basins.size()
            << " target basins to " << out.string() << "\n";
  return kExitOk;
}

void write_predictions_csv(const fs::path& path, const std::vector<PredictionRecord>& predictions) {
  std::ofstream os(path, std::ios::binary);
  os << "basin_id,issue_date,target_date,lead,predicted,observed\n";
  for (const auto& p : predictions) {
    os << p.basin_id << ',' << format_date(p.issue_date) << ',' << format_date(p.target_date) << ',' << p.lead << ','
       << format_double(p.predicted) << ',' << (p.observed ? format_double(*p.observed) : "") << '\n';
  }
  if (!os) throw DataError(DataErrorKind::kIo, path.string(), 0, "write failed");
}

void write_report_files(const fs::path& dir, const Evaluation& ev) {
  std::ofstream csv(dir / "per_basin.csv", std::ios::binary);
  write_report_csv(csv, ev.report);
  if (!csv) throw DataError(DataErrorKind::kIo, (dir / "per_basin.csv").string(), 0, "write failed");
  auto j = report_json(ev.report);
  j["warnings"] = ev.warnings;
  write_json(dir / "summary.json", j);
  write_predictions_csv(dir / "predictions.csv", ev.predictions);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

void print_progress(const TrainLogEntry& e, std::size_t total) {
  auto num = [](double v) { return std::isnan(v) ? std::string("NA") : format_double(v); };
  std::cerr << "epoch " << e.epoch << "/" << total << " [" << e.phase << "] lr=" << format_double(e.lr)
            << " loss_gs=" << num(e.loss_gs) << " loss_gt=" << num(e.loss_gt) << " loss_d=" << num(e.loss_d)
            << " val_nse=" << format_optional(e.val_nse) << "\n";
}

int cmd_train(const ExperimentConfig& c, bool resume) {
  if (c.data.source_dir.empty() || c.data.target_dir.empty()) {
    throw ConfigError("data.source_dir and data.target_dir are required (set them in --config or with --source-dir "
                      "and --target-dir)");
  }
  OutputLock lock(c.output_dir);
  const auto source = load_domain(c.data.source_dir, c.data.schema());
  const auto target = load_domain(c.data.target_dir, c.data.schema());
  ExperimentData data;
  try {
    data = prepare_experiment(source, target, c.data.ranges, {c.train.history, c.train.horizon, c.train.stride},
                              c.data.validation_stride, c.data.test_stride);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("cannot prepare data: ") + e.what());
  }
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
  write_text(c.output_dir / "config.ini", experiment_config_text(with_absolute_dirs(c)));

  std::vector<MetricsReport> reports;
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t r = 0; r < c.runs; ++r) {
    TrainConfig tc = c.train;
    tc.seed = c.train.seed + r;
    const fs::path dir = c.runs == 1 ? c.output_dir : c.output_dir / ("run_" + std::to_string(tc.seed));
    fs::create_directories(dir);
    TrainingSession session(tc, data);
    const fs::path last = dir / "checkpoint_last.bin";
    if (resume && fs::exists(last)) {
      session.restore(load_checkpoint(last));
      std::cerr << "resuming seed " << tc.seed << " after epoch " << session.epochs_completed() << "\n";
    }
    std::ofstream log(dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
    for (const auto& e : session.log()) write_log_line(log, e);
    log.flush();
    while (!session.done()) {
      const TrainLogEntry entry = session.step();
      write_log_line(log, entry);
      log.flush();
      auto ck = session.to_checkpoint();
      save_checkpoint(last, ck);
      if (session.best_epoch() == entry.epoch) {
        ck.parameters = ck.best_parameters;
        save_checkpoint(dir / "checkpoint_best.bin", ck);
      }
      print_progress(entry, session.total_epochs());
    }
    if (!log) throw DataError(DataErrorKind::kIo, (dir / "train_log.jsonl").string(), 0, "write failed");

    auto ev = session.evaluate_best_target_test();
    ev.report.seed = tc.seed;
    for (const auto& w : ev.warnings) std::cerr << "warning: " << w << "\n";
    write_report_files(dir, ev);
    std::cerr << "seed " << tc.seed << ": best epoch " << session.best_epoch()
              << ", target test median NSE " << format_optional(ev.report.median.nse) << "\n";
    reports.push_back(ev.report);
    runs.push_back({{"seed", tc.seed},
                    {"dir", fs::relative(dir, c.output_dir).string()},
                    {"epochs", session.epochs_completed()},
                    {"best_epoch", session.best_epoch()},
                    {"best_validation_nse", session.best_validation() ? nlohmann::json(*session.best_validation())
                                                                      : nlohmann::json(nullptr)}});
  }

  const auto summary = summarize_runs(reports);
  auto sj = summary_json(summary);
  sj["warnings"] = data.warnings;
  write_json(c.output_dir / "summary.json", sj);
  write_json(c.output_dir / "manifest.json",
             {{"command", "train"},
              {"mode", to_string(c.train.mode)},
              {"config_hash", hex64(fnv1a64(experiment_config_text(c)))},
              {"architecture_hash", hex64(fnv1a64(c.train.architecture_text()))},
              {"source_windows", data.source.train.size()},
              {"target_windows", {{"train", data.target.train.size()},
                                  {"validation", data.target.validation.size()},
                                  {"test", data.target.test.size()}}},
              {"runs", runs}});
  std::cout << "target test median NSE over " << summary.nse.runs << " run(s): mean "
            << format_double(summary.nse.mean) << ", std " << format_double(summary.nse.std) << "\n";
  return kExitOk;
}

int cmd_evaluate(const fs::path& checkpoint_path, const std::string& config_path, const Overrides& o,
                 const std::string& output, const std::string& split) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  ExperimentConfig c;
  if (config_path.empty()) {
    c.train = ck.config;
  } else {
    c = load_experiment_config(config_path);
  }
  o.apply(c);
  c.output_dir = output.empty() ? checkpoint_path.parent_path() / "evaluation" : fs::path(output);
  validate(c);
  if (fnv1a64(c.train.architecture_text()) != ck.architecture_hash) {
    throw CheckpointError("checkpoint " + checkpoint_path.string() + " is incompatible with the config: architecture " +
                          c.train.architecture_text() + " does not match the checkpoint's " +
                          ck.config.architecture_text());
  }
  if (c.data.target_dir.empty()) throw ConfigError("data.target_dir is required (--config or --target-dir)");

  OutputLock lock(c.output_dir);
  CsvSchema schema = c.data.schema();
  schema.dynamic_columns = ck.dynamic_columns;
  const auto target = load_domain(c.data.target_dir, schema);
  if (target.basins.empty()) throw ConfigError("no basins in " + c.data.target_dir.string());
  if (target.statics.names != ck.static_columns) {
    throw CheckpointError("static attributes of " + c.data.target_dir.string() + " differ from the checkpoint's");
  }
  auto parts = split_domain(target, c.data.ranges);
  const bool test = split == "test";
  const DomainData& part = test ? parts.test : parts.validation;
  const auto windows = make_domain_windows(part, ck.target_stats,
                                           {ck.config.history, ck.config.horizon,
                                            test ? c.data.test_stride : c.data.validation_stride});
  std::vector<std::string> ids;
  for (const auto& b : target.basins) ids.push_back(b.basin_id);
  const ModelSet models = models_from_checkpoint(ck);
  auto ev = evaluate(models.target_predictor(), windows, ids, ck.target_stats, {256, ck.config.seed});
  ev.warnings.insert(ev.warnings.begin(), parts.warnings.begin(), parts.warnings.end());
  for (const auto& w : ev.warnings) std::cerr << "warning: " << w << "\n";
  write_report_files(c.output_dir, ev);
  write_text(c.output_dir / "config.ini", experiment_config_text(with_absolute_dirs(c)));
  write_json(c.output_dir / "manifest.json", {{"command", "evaluate"},
                                              {"checkpoint", checkpoint_path.filename().string()},
                                              {"split", split},
                                              {"architecture_hash", hex64(ck.architecture_hash)},
                                              {"windows", windows.size()},
                                              {"basins", ev.report.basins.size()}});
  std::cout << split << " median NSE " << format_optional(ev.report.median.nse) << " over "
            << ev.report.basins.size() << " basins, " << ev.report.nse_negative_count << " with NSE < 0\n";
  return kExitOk;
}

int cmd_predict(const fs::path& checkpoint_path, const fs::path& basin_csv, const std::string& date_text,
                fs::path static_csv, const fs::path& output, const std::string& config_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  DataConfig d = config_path.empty() ? DataConfig{} : load_experiment_config(config_path).data;
  CsvSchema schema = d.schema();
  schema.dynamic_columns = ck.dynamic_columns;
  const Date first_day = parse_date(date_text);
  const auto series = load_basin_csv(basin_csv, schema);
  if (static_csv.empty()) static_csv = basin_csv.parent_path() / "static.csv";
  const auto table = load_static_csv(static_csv);
  const auto* row = table.find(series.basin_id);
  if (!row) throw DataError(DataErrorKind::kMissingStatic, static_csv.string(), 0, "no row for basin " + series.basin_id);
  std::vector<double> statics;
  for (const auto& name : ck.static_columns) {
    std::size_t i = 0;
    while (i < table.names.size() && table.names[i] != name) ++i;
    if (i == table.names.size()) {
      throw DataError(DataErrorKind::kMalformedHeader, static_csv.string(), 1, "missing attribute " + name);
    }
    statics.push_back(row->values[i]);
  }

  const Date issue = first_day - std::chrono::days{1};
  const std::vector<WindowSample> windows{
      forecast_window(series, statics, ck.target_stats, ck.config.history, ck.config.horizon, issue)};
  const ModelSet models = models_from_checkpoint(ck);
  const std::vector<std::size_t> index{0};
  const auto values = models.target_predictor()(windows, index);

  std::ostringstream csv;
  csv << "basin_id,issue_date,target_date,lead,forecast_mm_per_day\n";
  for (std::size_t k = 0; k < values.size(); ++k) {
    csv << series.basin_id << ',' << format_date(issue) << ',' << format_date(first_day + std::chrono::days{k})
        << ',' << k + 1 << ',' << format_double(ck.target_stats.denormalize_flow(values[k])) << '\n';
  }
  if (output.has_parent_path()) fs::create_directories(output.parent_path());
  write_text(output, csv.str());
  std::cout << csv.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-adaptive streamflow forecasting: synthesize data, train, evaluate and forecast."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "flowda 1.0");

  std::string config_path, output;
  Overrides synth_o, train_o, eval_o;

  auto* synth = app.add_subcommand("synth", "write a synthetic source/target dataset in the CSV layout");
  synth->add_option("--config", config_path, "INI config file ([synth] and [output] sections are used)");
  synth->add_option("--output", output, "output directory")->default_str("flowda_out");
  add_synth_flags(synth, synth_o);

  bool resume = false;
  auto* train = app.add_subcommand("train", "train a model and write checkpoints, the log and test scores");
  train->add_option("--config", config_path, "INI config file; flags override its values");
  train->add_option("--output", output, "output directory")->default_str("flowda_out");
  train->add_flag("--resume", resume, "continue from checkpoint_last.bin in the output directory");
  add_data_flags(train, train_o, true);
  add_train_flags(train, train_o);

  std::string checkpoint, split = "test";
  auto* eval = app.add_subcommand("evaluate", "score a checkpoint on the target domain");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--config", config_path, "INI config file (default: the checkpoint's model settings)");
  eval->add_option("--output", output, "report directory")->default_str("<checkpoint dir>/evaluation");
  eval->add_option("--split", split, "target split to score")->check(CLI::IsMember({"test", "validation"}))
      ->default_str("test");
  add_data_flags(eval, eval_o, false);

  std::string basin_csv, date, static_csv, forecast_out = "forecast.csv";
  auto* predict = app.add_subcommand("predict", "forecast one basin from its CSV file");
  predict->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  predict->add_option("--basin-csv", basin_csv, "basin CSV holding at least N days before --date")->required();
  predict->add_option("--date", date, "first forecast day (YYYY-MM-DD); the history is the N days before it")
      ->required();
  predict->add_option("--static-csv", static_csv, "static attributes")->default_str("static.csv beside --basin-csv");
  predict->add_option("--output", forecast_out, "forecast CSV")->default_str("forecast.csv");
  predict->add_option("--config", config_path, "INI config file ([data] CSV settings are used)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(resolve(config_path, synth_o, output));
    if (*train) return cmd_train(resolve(config_path, train_o, output), resume);
    if (*eval) return cmd_evaluate(checkpoint, config_path, eval_o, output, split);
    return cmd_predict(checkpoint, basin_csv, date, static_csv, forecast_out, config_path);
  } catch (const NumericError& e) {
    std::cerr << "error: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
