#pragma once

#include <string>
#include <vector>

#include "flowda/data.hpp"
#include "flowda/training.hpp"

// Small synthetic experiments shared by the training tests and the
// acceptance runner.

namespace fixtures {

using namespace flowda;

/// 500 days from 1999-10-01: one training year, then short validation and test spans.
inline SplitRanges tiny_ranges() {
  SplitRanges r;
  r.train = {parse_date("1999-10-01"), parse_date("2000-09-30")};
  r.validation = {parse_date("2000-10-01"), parse_date("2000-12-15")};
  r.test = {parse_date("2000-12-16"), parse_date("2001-02-11")};
  return r;
}

inline SynthDataset tiny_synth(std::uint64_t seed = 3, std::size_t n_source = 3, std::size_t n_target = 2) {
  SynthConfig sc;
  sc.n_source_basins = n_source;
  sc.n_target_basins = n_target;
  sc.length_days = 500;
  sc.start = parse_date("1999-10-01");
  sc.seed = seed;
  return synth_generate(sc);
}

inline ExperimentData tiny_experiment(std::uint64_t seed = 3, std::size_t history = 10, std::size_t stride = 5,
                                      std::size_t horizon = 1) {
  auto ds = tiny_synth(seed);
  return prepare_experiment(ds.source, ds.target, tiny_ranges(), {history, horizon, stride});
}

inline TrainConfig tiny_config(TrainMode mode, std::size_t history = 10, std::size_t horizon = 1) {
  TrainConfig c;
  c.mode = mode;
  c.hidden_size = 8;
  c.latent_width = 8;
  c.discriminator_hidden = 8;
  c.batch_size = 32;
  c.epochs = 3;
  c.pretrain_epochs = 2;
  c.history = history;
  c.horizon = horizon;
  c.seed = 5;
  return c;
}

inline GeneratorConfig generator_config(const TrainConfig& c, const ExperimentData& data) {
  return {data.dynamic_columns.size(), data.static_columns.size(), c.hidden_size, c.embedding_width,
          c.attention_width, c.dropout, c.scoring};
}

inline std::vector<std::vector<double>> values_of(const std::vector<NamedTensor>& params) {
  std::vector<std::vector<double>> out;
  for (const auto& [n, t] : params) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

struct DecoupledComparison {
  bool losses_equal = true;
  bool source_equal = true;
  bool target_equal = true;
  bool projection_unchanged = true;
};

/**
 * Trains an adversarial model with lambda = 0 and, in lockstep, two lone
 * generators on the same batches with the same generator streams.
 */
inline DecoupledComparison lambda_zero_versus_decoupled(const ExperimentData& data, TrainConfig c, std::size_t epochs) {
  c.lambda = 0.0;
  RngStreams ra = RngStreams::from_seed(c.seed);
  RngStreams rb = ra;
  const auto g = generator_config(c, data);
  auto adv = AdversarialModel::init(g, c.latent_width, c.discriminator_hidden, ra);
  auto src = GeneratorNetwork::init(g, rb.init_source);
  auto tgt = GeneratorNetwork::init(g, rb.init_target);
  const auto projection_before = values_of(adv.projection.named_parameters("p"));
  auto groups = AdversarialGroups::make(adv);
  ParamGroup gs{"source", tensors_of(src.named_parameters("source")), {}};
  ParamGroup gt{"target", tensors_of(tgt.named_parameters("target")), {}};

  DecoupledComparison out;
  for (std::size_t e = 1; e <= epochs; ++e) {
    StepSettings s{lr_schedule(e), 0.0, c.clip_norm, c.loss_epsilon};
    auto sched = paired_schedule(data.source.train.size(), data.target.train.size(), c.batch_size,
                                 ra.shuffle_source, ra.shuffle_target);
    auto twin = paired_schedule(data.source.train.size(), data.target.train.size(), c.batch_size,
                                rb.shuffle_source, rb.shuffle_target);
    std::vector<std::vector<std::size_t>> sb, tb;
    for (const auto& p : twin) {
      sb.push_back(p.source);
      tb.push_back(p.target);
    }
    auto stats = adversarial_epoch(adv, groups, data.source.train, data.target.train, sched, s,
                                   {ra.dropout_source, ra.dropout_target});
    const double ls = supervised_epoch(src, gs, data.source.train, sb, s, rb.dropout_source);
    const double lt = supervised_epoch(tgt, gt, data.target.train, tb, s, rb.dropout_target);
    out.losses_equal = out.losses_equal && stats.loss_gs == ls && stats.loss_gt == lt;
  }
  out.source_equal = values_of(adv.source.named_parameters("g")) == values_of(src.named_parameters("g"));
  out.target_equal = values_of(adv.target.named_parameters("g")) == values_of(tgt.named_parameters("g"));
  out.projection_unchanged = values_of(adv.projection.named_parameters("p")) == projection_before;
  return out;
}

struct IsolationResult {
  bool disc_step_only_touches_disc = true;
  bool disc_step_changes_disc = false;
  bool gen_step_keeps_disc = true;
  bool gen_step_changes_generators = false;
  bool gen_step_changes_projection = false;
};

/**
 * Runs the discriminator half of a step on model A and a full adversarial
 * step on an identical model B. B's discriminator must equal A's, and A's
 * generators and projection must be untouched.
 */
inline IsolationResult parameter_isolation(const ExperimentData& data, TrainConfig c) {
  const auto g = generator_config(c, data);
  RngStreams ra = RngStreams::from_seed(c.seed);
  RngStreams rb = ra;
  auto a = AdversarialModel::init(g, c.latent_width, c.discriminator_hidden, ra);
  auto b = AdversarialModel::init(g, c.latent_width, c.discriminator_hidden, rb);
  auto ga = AdversarialGroups::make(a);
  auto gb = AdversarialGroups::make(b);
  std::vector<std::size_t> si{0, 1, 2, 3, 4, 5, 6, 7}, ti{0, 1, 2, 3, 4, 5, 6, 7};
  Batch sbatch = make_batch(data.source.train, si), tbatch = make_batch(data.target.train, ti);
  StepSettings s{0.01, c.lambda, c.clip_norm, c.loss_epsilon};

  auto gens = [](const AdversarialModel& m) {
    auto v = values_of(m.source.named_parameters("s"));
    auto t = values_of(m.target.named_parameters("t"));
    v.insert(v.end(), t.begin(), t.end());
    return v;
  };
  auto proj = [](const AdversarialModel& m) { return values_of(m.projection.named_parameters("p")); };
  auto disc = [](const AdversarialModel& m) { return values_of(m.discriminator.named_parameters("d")); };

  const auto gens0 = gens(a), proj0 = proj(a), disc0 = disc(a);
  {
    GradientTape tape;
    auto fs = generator_forward(a.source, sbatch, ForwardMode::kTrain, ra.dropout_source, true);
    auto ft = generator_forward(a.target, tbatch, ForwardMode::kTrain, ra.dropout_target, true);
    Tensor cs = stacked_contexts(fs), ct = stacked_contexts(ft);
    Tensor features = project_shared(a.projection, concat({cs, ct}, 0));
    discriminator_step(a.discriminator, ga.discriminator, features, domain_labels(cs.dim(0), ct.dim(0)), s.lr,
                       s.clip_norm);
  }
  adversarial_step(b, gb, sbatch, tbatch, s, {rb.dropout_source, rb.dropout_target});

  IsolationResult out;
  out.disc_step_only_touches_disc = gens(a) == gens0 && proj(a) == proj0;
  out.disc_step_changes_disc = disc(a) != disc0;
  out.gen_step_keeps_disc = disc(b) == disc(a);
  out.gen_step_changes_generators = gens(b) != gens0;
  out.gen_step_changes_projection = proj(b) != proj0;
  return out;
}

}  // namespace fixtures
