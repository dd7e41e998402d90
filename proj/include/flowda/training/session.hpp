#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/data.hpp"
#include "flowda/model.hpp"
#include "flowda/training/checkpoint.hpp"
#include "flowda/training/config.hpp"
#include "flowda/training/evaluate.hpp"
#include "flowda/training/log.hpp"
#include "flowda/training/optim.hpp"
#include "flowda/training/schedule.hpp"
#include "flowda/training/steps.hpp"

namespace flowda {

/// One domain split, normalized with its own training statistics.
struct PreparedDomain {
  NormStats stats;
  std::vector<std::string> basin_ids;  // every basin of the domain
  std::vector<WindowSample> train, validation, test;
};

struct ExperimentData {
  PreparedDomain source;
  PreparedDomain target;
  std::vector<std::string> dynamic_columns;
  std::vector<std::string> static_columns;
  std::vector<std::string> warnings;
};

struct PrepareOptions {
  bool validation = true;
  bool test = true;
  std::size_t validation_stride = 1;
  std::size_t test_stride = 1;
};

/**
 * Splits by date, fits statistics on the training split only and builds
 * windows. Loss variances of every split come from the training period.
 */
inline PreparedDomain prepare_domain(const DomainData& data, const SplitRanges& ranges, const WindowConfig& windows,
                                     const PrepareOptions& options, std::vector<std::string>& warnings) {
  auto split = split_domain(data, ranges);
  warnings.insert(warnings.end(), split.warnings.begin(), split.warnings.end());
  PreparedDomain out;
  for (const auto& b : data.basins) out.basin_ids.push_back(b.basin_id);
  out.stats = compute_norm_stats(split.train.basins, split.train.statics);
  std::map<std::string, double> variance;
  for (const auto& b : split.train.basins) variance[b.basin_id] = normalized_flow_variance(b, out.stats);
  auto variances_for = [&](const DomainData& part) {
    std::vector<double> v;
    for (const auto& b : part.basins) {
      auto it = variance.find(b.basin_id);
      v.push_back(it == variance.end() ? 0.0 : it->second);
    }
    return v;
  };
  auto tv = variances_for(split.train);
  out.train = make_domain_windows(split.train, out.stats, windows, &tv);
  if (options.validation) {
    auto vv = variances_for(split.validation);
    out.validation = make_domain_windows(split.validation, out.stats, {windows.history, windows.horizon,
                                                                      options.validation_stride}, &vv);
  }
  if (options.test) {
    auto sv = variances_for(split.test);
    out.test = make_domain_windows(split.test, out.stats, {windows.history, windows.horizon, options.test_stride},
                                   &sv);
  }
  return out;
}

/// `windows.stride` applies to training windows; validation and test
/// windows use their own strides (every day by default).
inline ExperimentData prepare_experiment(const DomainData& source, const DomainData& target, const SplitRanges& ranges,
                                         const WindowConfig& windows, std::size_t validation_stride = 1,
                                         std::size_t test_stride = 1) {
  if (source.basins.empty() || target.basins.empty()) throw std::invalid_argument("both domains need basins");
  ExperimentData out;
  out.dynamic_columns = source.basins.front().dynamic_names;
  out.static_columns = source.statics.names;
  if (target.basins.front().dynamic_names != out.dynamic_columns || target.statics.names != out.static_columns) {
    throw std::invalid_argument("source and target domains must share feature columns");
  }
  // Only the target domain is validated and scored.
  out.source = prepare_domain(source, ranges, windows, {false, false, 1, 1}, out.warnings);
  out.target = prepare_domain(target, ranges, windows, {true, true, validation_stride, test_stride}, out.warnings);
  return out;
}

/// Every network a run can own; which ones are live depends on the mode.
struct ModelSet {
  TrainMode mode = TrainMode::kAdversarial;
  AdversarialModel adv;  // seq2seq_tl uses only the two generators
  LstmRegressor regressor;

  static ModelSet init(const TrainConfig& c, std::size_t dynamic_width, std::size_t static_width, RngStreams& rngs) {
    ModelSet m;
    m.mode = c.mode;
    if (c.mode == TrainMode::kLstmTl) {
      m.regressor = LstmRegressor::init({dynamic_width, static_width, c.hidden_size, c.horizon, c.dropout},
                                        rngs.init_source);
      return m;
    }
    GeneratorConfig g{dynamic_width, static_width, c.hidden_size, c.embedding_width, c.attention_width, c.dropout,
                      c.scoring};
    if (c.mode == TrainMode::kAdversarial) {
      m.adv = AdversarialModel::init(g, c.latent_width, c.discriminator_hidden, rngs);
    } else {
      m.adv.source = GeneratorNetwork::init(g, rngs.init_source);
      m.adv.target = GeneratorNetwork::init(g, rngs.init_target);
    }
    return m;
  }

  std::vector<NamedTensor> named_parameters() const {
    if (mode == TrainMode::kLstmTl) return regressor.named_parameters("regressor");
    auto out = adv.source.named_parameters("source");
    auto t = adv.target.named_parameters("target");
    out.insert(out.end(), t.begin(), t.end());
    if (mode == TrainMode::kAdversarial) {
      for (auto&& list : {adv.projection.named_parameters("projection"),
                          adv.discriminator.named_parameters("discriminator")}) {
        out.insert(out.end(), list.begin(), list.end());
      }
    }
    return out;
  }

  /// Forecasts of the target-domain model.
  Predictor target_predictor() const {
    if (mode == TrainMode::kLstmTl) return regressor_predictor(regressor);
    return generator_predictor(adv.target);
  }
};

/// Rebuilds the networks of a checkpoint with its stored weights.
inline ModelSet models_from_checkpoint(const Checkpoint& c, bool best = false) {
  RngStreams scratch = RngStreams::from_seed(c.config.seed);
  ModelSet m = ModelSet::init(c.config, c.dynamic_columns.size(), c.static_columns.size(), scratch);
  assign(m.named_parameters(), best ? c.best_parameters : c.parameters);
  return m;
}

/// Deep copy of one generator's weights into another of the same shape.
inline void copy_weights(const GeneratorNetwork& from, GeneratorNetwork& to) {
  assign(to.named_parameters("g"), snapshot(from.named_parameters("g")));
}

/**
 * Epoch-by-epoch training of one run. Adversarial mode runs `epochs`
 * adversarial epochs. The transfer baselines pretrain on source windows for
 * `pretrain_epochs` epochs, then fine-tune on target windows for `epochs`
 * epochs with fresh optimizer state and a restarted learning-rate schedule.
 * After every target-facing epoch the target validation median NSE is
 * recorded and the best parameters are kept.
 */
class TrainingSession {
 public:
  TrainingSession(TrainConfig config, const ExperimentData& data)
      : config_(std::move(config)), data_(&data), rngs_(RngStreams::from_seed(config_.seed)) {
    config_.validate();
    if (data.source.train.empty()) throw std::invalid_argument("no source training windows");
    if (config_.mode == TrainMode::kAdversarial && data.target.train.empty()) {
      throw std::invalid_argument("adversarial training needs target training windows");
    }
    const auto& w = data.source.train.front();
    if (w.history_length != config_.history || w.horizon != config_.horizon) {
      throw std::invalid_argument("windows do not match the configured history/horizon");
    }
    models_ = ModelSet::init(config_, data.dynamic_columns.size(), data.static_columns.size(), rngs_);
    phase_ = config_.mode == TrainMode::kAdversarial ? "adversarial" : "pretrain";
    build_groups();
    best_ = snapshot(models_.named_parameters());
  }

  const TrainConfig& config() const { return config_; }
  const ModelSet& models() const { return models_; }
  const std::vector<TrainLogEntry>& log() const { return log_; }
  const std::string& phase() const { return phase_; }
  std::size_t epochs_completed() const { return log_.size(); }
  std::size_t total_epochs() const {
    return config_.mode == TrainMode::kAdversarial ? config_.epochs : config_.effective_pretrain_epochs() + config_.epochs;
  }
  bool done() const { return epochs_completed() >= total_epochs(); }
  std::optional<double> best_validation() const { return best_val_; }
  std::size_t best_epoch() const { return best_epoch_; }
  const std::vector<NamedValues>& best_parameters() const { return best_; }

  /// Runs the next epoch and appends its log entry.
  const TrainLogEntry& step() {
    if (done()) throw std::logic_error("training already finished");
    if (phase_ == "pretrain" && phase_epoch_ == config_.effective_pretrain_epochs()) begin_finetune();
    const std::size_t e = phase_epoch_ + 1;
    TrainLogEntry entry;
    entry.epoch = epochs_completed() + 1;
    entry.phase = phase_;
    entry.lr = lr_schedule(e, config_.lr_first_epoch, config_.lr_rest);
    StepSettings s{entry.lr, config_.lambda, config_.clip_norm, config_.loss_epsilon};

    if (config_.mode == TrainMode::kAdversarial) {
      auto schedule = paired_schedule(data_->source.train.size(), data_->target.train.size(), config_.batch_size,
                                      rngs_.shuffle_source, rngs_.shuffle_target);
      auto groups = adversarial_groups();
      auto stats = adversarial_epoch(models_.adv, groups, data_->source.train, data_->target.train, schedule, s,
                                     {rngs_.dropout_source, rngs_.dropout_target});
      store_groups(groups);
      entry.loss_gs = stats.loss_gs;
      entry.loss_gt = stats.loss_gt;
      entry.loss_d = stats.loss_d;
      entry.loss_d_start = stats.loss_d_start;
      entry.disc_accuracy = stats.disc_accuracy;
      entry.steps = stats.steps;
    } else if (phase_ == "pretrain") {
      auto batches = single_schedule(data_->source.train.size(), config_.batch_size, rngs_.shuffle_source);
      entry.loss_gs = run_supervised("source", data_->source.train, batches, s, rngs_.dropout_source);
      entry.steps = batches.size();
    } else {
      auto batches = single_schedule(data_->target.train.size(), config_.batch_size, rngs_.shuffle_target);
      entry.loss_gt = run_supervised("target", data_->target.train, batches, s, rngs_.dropout_target);
      entry.steps = batches.size();
    }
    ++phase_epoch_;

    if (phase_ != "pretrain") {
      entry.val_nse = validation_nse();
      const bool better = !best_epoch_ || (entry.val_nse && (!best_val_ || *entry.val_nse > *best_val_)) ||
                          (!entry.val_nse && !best_val_);
      if (better) {
        best_val_ = entry.val_nse;
        best_epoch_ = entry.epoch;
        best_ = snapshot(models_.named_parameters());
      }
    }
    log_.push_back(entry);
    return log_.back();
  }

  /// Switches a transfer baseline from pretraining to fine-tuning.
  void begin_finetune() {
    if (config_.mode == TrainMode::kAdversarial) throw std::logic_error("adversarial mode has no fine-tuning phase");
    if (phase_ != "pretrain") throw std::logic_error("fine-tuning already started");
    if (phase_epoch_ < config_.effective_pretrain_epochs()) {
      throw std::logic_error("fine-tuning requested before pretraining completed");
    }
    if (data_->target.train.empty()) throw std::invalid_argument("fine-tuning needs target training windows");
    if (config_.mode == TrainMode::kSeq2SeqTl) {
      copy_weights(models_.adv.source, models_.adv.target);
      optim_["target"] = {};
    } else {
      optim_["regressor"] = {};
    }
    phase_ = "finetune";
    phase_epoch_ = 0;
  }

  void run(const std::function<void(const TrainLogEntry&)>& on_epoch = {}) {
    while (!done()) {
      const auto& e = step();
      if (on_epoch) on_epoch(e);
    }
  }

  /// Target validation median NSE of the current parameters, if defined.
  std::optional<double> validation_nse() const {
    if (data_->target.validation.empty()) return std::nullopt;
    auto ev = evaluate(models_.target_predictor(), data_->target.validation,
                       basin_ids_of(data_->target.validation), data_->target.stats);
    return ev.report.median.nse;
  }

  /// Target test evaluation with the current parameters.
  Evaluation evaluate_target_test() const {
    return evaluate(models_.target_predictor(), data_->target.test, data_->target.basin_ids, data_->target.stats,
                    {256, config_.seed});
  }

  /// Target test evaluation with the best parameters. Current ones are restored afterwards.
  Evaluation evaluate_best_target_test() {
    auto current = snapshot(models_.named_parameters());
    assign(models_.named_parameters(), best_);
    try {
      auto ev = evaluate_target_test();
      assign(models_.named_parameters(), current);
      return ev;
    } catch (...) {
      assign(models_.named_parameters(), current);
      throw;
    }
  }

  Checkpoint to_checkpoint() {
    Checkpoint c;
    c.config = config_;
    c.architecture_hash = fnv1a64(config_.architecture_text());
    c.dynamic_columns = data_->dynamic_columns;
    c.static_columns = data_->static_columns;
    c.source_stats = data_->source.stats;
    c.target_stats = data_->target.stats;
    c.parameters = snapshot(models_.named_parameters());
    c.best_parameters = best_;
    for (const auto& [name, state] : optim_) c.optimizers.emplace_back(name, state);
    c.phase = phase_;
    c.epochs_completed = epochs_completed();
    c.phase_epoch = phase_epoch_;
    c.best_val = best_val_.value_or(std::numeric_limits<double>::quiet_NaN());
    c.best_epoch = best_epoch_;
    c.rng_state = rngs_.serialize();
    c.log = log_;
    return c;
  }

  /// Continues a run from a checkpoint written by a session with the same
  /// configuration. Nothing changes if the checkpoint does not fit.
  void restore(const Checkpoint& c) {
    if (config_text(c.config) != config_text(config_)) throw CheckpointError("checkpoint was written with another config");
    if (c.dynamic_columns != data_->dynamic_columns || c.static_columns != data_->static_columns) {
      throw CheckpointError("checkpoint feature columns differ from the data");
    }
    if (c.log.size() != c.epochs_completed || c.epochs_completed > total_epochs()) {
      throw CheckpointError("checkpoint progress is inconsistent");
    }
    if (c.phase != "adversarial" && c.phase != "pretrain" && c.phase != "finetune") {
      throw CheckpointError("unknown phase '" + c.phase + "'");
    }
    RngStreams rngs = rngs_;
    rngs.deserialize(c.rng_state);
    // Trial assignment into a scratch copy validates names and shapes.
    RngStreams unused = RngStreams::from_seed(0);
    ModelSet scratch = ModelSet::init(config_, c.dynamic_columns.size(), c.static_columns.size(), unused);
    assign(scratch.named_parameters(), c.parameters);
    assign(scratch.named_parameters(), c.best_parameters);

    assign(models_.named_parameters(), c.parameters);
    best_ = c.best_parameters;
    optim_.clear();
    for (const auto& [name, state] : c.optimizers) optim_[name] = state;
    phase_ = c.phase;
    phase_epoch_ = c.phase_epoch;
    best_val_ = std::isnan(c.best_val) ? std::nullopt : std::optional<double>(c.best_val);
    best_epoch_ = c.best_epoch;
    rngs_ = rngs;
    log_ = c.log;
  }

 private:
  void build_groups() {
    optim_.clear();
    if (config_.mode == TrainMode::kAdversarial) {
      for (const char* g : {"source", "target", "projection", "discriminator"}) optim_[g] = {};
    } else if (config_.mode == TrainMode::kSeq2SeqTl) {
      optim_["source"] = {};
    } else {
      optim_["regressor"] = {};
    }
  }

  AdversarialGroups adversarial_groups() {
    auto g = AdversarialGroups::make(models_.adv);
    for (auto* p : g.all()) p->adam = optim_.at(p->name);
    return g;
  }

  void store_groups(AdversarialGroups& g) {
    for (auto* p : g.all()) optim_[p->name] = std::move(p->adam);
  }

  double run_supervised(const std::string& domain, const std::vector<WindowSample>& windows,
                        const std::vector<std::vector<std::size_t>>& batches, const StepSettings& s, Rng& dropout) {
    if (config_.mode == TrainMode::kLstmTl) {
      ParamGroup g{"regressor", tensors_of(models_.regressor.named_parameters("regressor")), optim_.at("regressor")};
      const double loss = regressor_epoch(models_.regressor, g, windows, batches, s, dropout);
      optim_["regressor"] = std::move(g.adam);
      return loss;
    }
    auto& gen = domain == "source" ? models_.adv.source : models_.adv.target;
    ParamGroup g{domain, tensors_of(gen.named_parameters(domain)), optim_.at(domain)};
    const double loss = supervised_epoch(gen, g, windows, batches, s, dropout);
    optim_[domain] = std::move(g.adam);
    return loss;
  }

  TrainConfig config_;
  const ExperimentData* data_;
  RngStreams rngs_;
  ModelSet models_;
  std::map<std::string, AdamState> optim_;
  std::string phase_;
  std::size_t phase_epoch_ = 0;
  std::vector<TrainLogEntry> log_;
  std::optional<double> best_val_;
  std::size_t best_epoch_ = 0;
  std::vector<NamedValues> best_;
};

}  // namespace flowda
