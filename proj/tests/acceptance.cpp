// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails. Pass criterion numbers as
// arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "flowda/data.hpp"
#include "flowda/layers.hpp"
#include "flowda/metrics.hpp"
#include "flowda/model.hpp"
#include "flowda/numerics.hpp"
#include "flowda/training.hpp"
#include "test_helpers.hpp"
#include "training_fixtures.hpp"

using namespace flowda;
using flowda::testing::random_tensor;
using flowda::testing::random_values;
using flowda::testing::weighted_total;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// ---------------------------------------------------------------- 1

Outcome gradient_correctness() {
  std::vector<std::pair<std::string, double>> worst{{"mlp", 0}, {"lstm_cell", 0}, {"attention", 0}, {"projection", 0},
                                                    {"discriminator", 0}, {"nse_loss", 0}, {"bce", 0}};
  auto record = [&](std::size_t i, const GradCheckResult& r) { worst[i].second = std::max(worst[i].second, r.max_relative_error); };
  const GradCheckOptions options{.step = 1e-5, .tolerance = 1e-4};
  std::size_t instances = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed, ++instances) {
    Rng rng(1000 + seed);
    auto mlp = MlpParams::init({4, 6, 3}, Activation::kTanh, rng);
    auto x = random_tensor({3, 4}, rng);
    std::vector<Tensor> in{x};
    for (auto& [n, t] : mlp.named_parameters("m")) in.push_back(t);
    record(0, grad_check([&] { return weighted_total(mlp_forward(mlp, x)); }, in, options));

    auto lstm = LstmParams::init(3, 5, rng);
    auto xt = random_tensor({2, 3}, rng), h = random_tensor({2, 5}, rng), c = random_tensor({2, 5}, rng);
    record(1, grad_check(
                  [&] {
                    auto s = lstm_cell_step(lstm, xt, h, c);
                    return add(weighted_total(s.h, 1), weighted_total(s.c, 2));
                  },
                  {xt, h, c, lstm.input_weights, lstm.recurrent_weights, lstm.bias}, options));

    auto att = AttentionParams::init(5, 4, 6, rng);
    auto states = random_tensor({2, 7, 4}, rng);
    auto q = random_tensor({2, 5}, rng);
    record(2, grad_check(
                  [&] {
                    auto out = attend(att, q, prepare_keys(att, states));
                    return add(weighted_total(out.context, 3), weighted_total(out.weights, 4));
                  },
                  {states, q, att.decoder_projection, att.encoder_projection, att.score_vector}, options));

    auto proj = SharedProjection::init(5, 4, rng);
    auto ctx = random_tensor({6, 5}, rng);
    std::vector<Tensor> pin{ctx};
    for (auto& [n, t] : proj.named_parameters("p")) pin.push_back(t);
    record(3, grad_check([&] { return weighted_total(project_shared(proj, ctx)); }, pin, options));

    auto disc = DiscriminatorNetwork::init(4, 6, rng);
    auto feats = random_tensor({8, 4}, rng);
    auto labels = domain_labels(4, 4);
    std::vector<Tensor> din{feats};
    for (auto& [n, t] : disc.named_parameters("d")) din.push_back(t);
    record(4, grad_check([&] { return bce_with_logits(discriminator_logits(disc, feats), labels); }, din, options));

    auto pred = random_tensor({4, 3}, rng), obs = random_tensor({4, 3}, rng);
    Tensor mask({4, 3}, {1, 1, 0, 1, 1, 1, 0, 1, 1, 1, 1, 1});
    const std::vector<double> var{0.5, 1.0, 2.0, 0.25};
    record(5, grad_check([&] { return nse_loss(pred, obs, mask, var); }, {pred}, options));

    auto logits = random_tensor({10}, rng, -4, 4);
    std::vector<double> y(10);
    for (std::size_t i = 0; i < 10; ++i) y[i] = static_cast<double>(rng() % 2);
    Tensor yt = Tensor::vector(y);
    record(6, grad_check([&] { return bce_with_logits(logits, yt); }, {logits}, options));
  }
  bool ok = true;
  std::string detail = std::to_string(instances) + " instances each, max rel err:";
  for (const auto& [name, err] : worst) {
    ok = ok && err < 1e-4;
    detail += " " + name + "=" + num(err, 3);
  }
  return {ok, detail};
}

// ---------------------------------------------------------------- 2

struct DirectFormulas {
  static long double mean(const std::vector<double>& x) {
    long double s = 0;
    for (double v : x) s += v;
    return s / x.size();
  }
  static long double sd(const std::vector<double>& x) {
    const auto m = mean(x);
    long double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / x.size());
  }
  static long double nse(const std::vector<double>& qm, const std::vector<double>& qo) {
    const auto m = mean(qo);
    long double a = 0, b = 0;
    for (std::size_t i = 0; i < qo.size(); ++i) {
      a += (static_cast<long double>(qm[i]) - qo[i]) * (static_cast<long double>(qm[i]) - qo[i]);
      b += (qo[i] - m) * (qo[i] - m);
    }
    return 1 - a / b;
  }
  static long double kge(const std::vector<double>& qm, const std::vector<double>& qo) {
    const auto mm = mean(qm), mo = mean(qo);
    long double c = 0;
    for (std::size_t i = 0; i < qo.size(); ++i) c += (qm[i] - mm) * (qo[i] - mo);
    const auto r = c / qo.size() / (sd(qm) * sd(qo));
    const auto a = sd(qm) / sd(qo), b = mm / mo;
    return 1 - std::sqrt((r - 1) * (r - 1) + (a - 1) * (a - 1) + (b - 1) * (b - 1));
  }
};

Outcome metric_oracles() {
  std::mt19937_64 rng(77);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng() % 200;
    auto qo = random_values(n, rng, 0.05, 30);
    auto qm = random_values(n, rng, 0.05, 30);
    const auto s = skill_scores(qm, qo);
    if (!s.nse || !s.kge || !s.alpha_nse || !s.beta_nse) return {false, "undefined score on pair " + std::to_string(t)};
    using D = DirectFormulas;
    worst = std::max({worst, std::abs(*s.nse - static_cast<double>(D::nse(qm, qo))),
                      std::abs(*s.kge - static_cast<double>(D::kge(qm, qo))),
                      std::abs(*s.alpha_nse - static_cast<double>(D::sd(qm) / D::sd(qo))),
                      std::abs(*s.beta_nse - static_cast<double>((D::mean(qm) - D::mean(qo)) / D::sd(qo)))});
  }
  auto round4 = [](double v) { return std::round(v * 1e4) / 1e4; };
  const double nse_case = *nse(std::vector<double>{1, 2, 3, 5}, std::vector<double>{1, 2, 3, 4});
  const std::vector<double> qo{1, 3, 2, 5, 4};
  std::vector<double> doubled;
  for (double v : qo) doubled.push_back(2 * v);
  const double kge_case = *kge(doubled, qo);
  const double bce_case = binary_cross_entropy(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 0});
  const bool hand = round4(nse_case) == 0.8 && round4(kge_case) == round4(1 - std::sqrt(2.0)) &&
                    round4(kge_case) == -0.4142 && round4(bce_case) == 0.6931;
  return {worst < 1e-10 && hand, "1000 pairs, max |diff|=" + num(worst, 3) + "; NSE example " + num(nse_case, 6) +
                                     ", KGE doubled " + num(kge_case, 6) + ", BCE(0.5) " + num(bce_case, 6)};
}

// ---------------------------------------------------------------- 3

Outcome attention_invariants() {
  Rng rng(303);
  double worst_sum = 0;
  bool positive = true, hull = true;
  for (std::size_t i = 0; i < 100; ++i) {
    const std::size_t n = 1 + i % 50;
    auto p = AttentionParams::init(6, 5, 7, rng);
    auto states = random_tensor({1, n, 5}, rng, -3, 3);
    auto out = attend(p, random_tensor({1, 6}, rng, -2, 2), prepare_keys(p, states));
    double total = 0;
    for (std::size_t s = 0; s < n; ++s) {
      total += out.weights.at({0, s});
      positive = positive && out.weights.at({0, s}) > 0.0;
    }
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    for (std::size_t j = 0; j < 5; ++j) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t s = 0; s < n; ++s) {
        lo = std::min(lo, states.at({0, s, j}));
        hi = std::max(hi, states.at({0, s, j}));
      }
      const double c = out.context.at({0, j});
      hull = hull && c >= lo - 1e-12 && c <= hi + 1e-12;
    }
  }
  auto p = AttentionParams::init(6, 5, 7, rng);
  p.score_vector = Tensor::zeros(p.score_vector.shape());
  auto out = attend(p, random_tensor({1, 6}, rng), prepare_keys(p, random_tensor({1, 9, 5}, rng)));
  double uniform_err = 0;
  for (std::size_t s = 0; s < 9; ++s) uniform_err = std::max(uniform_err, std::abs(out.weights.at({0, s}) - 1.0 / 9.0));
  const bool ok = worst_sum <= 1e-10 && positive && hull && uniform_err <= 1e-15;
  return {ok, "100 instances, max |sum-1|=" + num(worst_sum, 3) + ", positive=" + (positive ? "yes" : "no") +
                  ", in hull=" + (hull ? "yes" : "no") + ", v=0 max deviation from 1/N=" + num(uniform_err, 3)};
}

// ---------------------------------------------------------------- 4

Outcome sign_structure() {
  const auto data = fixtures::tiny_experiment();
  const auto c = fixtures::tiny_config(TrainMode::kAdversarial);
  const auto iso = fixtures::parameter_isolation(data, c);
  const auto dec = fixtures::lambda_zero_versus_decoupled(data, c, 3);
  const bool isolation = iso.disc_step_only_touches_disc && iso.disc_step_changes_disc && iso.gen_step_keeps_disc &&
                         iso.gen_step_changes_generators && iso.gen_step_changes_projection;
  const bool decoupled = dec.losses_equal && dec.source_equal && dec.target_equal && dec.projection_unchanged;
  return {isolation && decoupled,
          std::string("D step touches only theta_D: ") + (iso.disc_step_only_touches_disc ? "yes" : "no") +
              ", G step leaves theta_D: " + (iso.gen_step_keeps_disc ? "yes" : "no") +
              ", lambda=0 bit-identical to decoupled training (3 epochs): " + (decoupled ? "yes" : "no")};
}

// ---------------------------------------------------------------- 5

Outcome overfit_capability() {
  SynthConfig sc;
  sc.n_source_basins = 1;
  sc.n_target_basins = 1;
  sc.length_days = 365;
  sc.seed = 1;
  const auto ds = synth_generate(sc);
  const auto stats = compute_norm_stats(ds.source.basins, ds.source.statics);
  const auto windows = make_domain_windows(ds.source, stats, {30, 1, 1});
  const TrainConfig defaults;
  int reached = 0;
  std::string detail = std::to_string(windows.size()) + " windows, hidden " + std::to_string(defaults.hidden_size) +
                       ", dropout " + num(defaults.dropout) + ";";
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto rngs = RngStreams::from_seed(seed);
    GeneratorConfig g{ds.source.basins[0].dynamic_width(), ds.source.statics.names.size(), defaults.hidden_size,
                      defaults.embedding_width, defaults.attention_width, defaults.dropout, defaults.scoring};
    auto gen = GeneratorNetwork::init(g, rngs.init_source);
    ParamGroup group{"source", tensors_of(gen.named_parameters("source")), {}};
    double nse_value = -INFINITY;
    std::size_t e = 1;
    for (; e <= 500; ++e) {
      auto batches = single_schedule(windows.size(), defaults.batch_size, rngs.shuffle_source);
      supervised_epoch(gen, group, windows, batches,
                       {lr_schedule(e), 0.0, defaults.clip_norm, defaults.loss_epsilon}, rngs.dropout_source);
      auto ev = evaluate(generator_predictor(gen), windows, {ds.source.basins[0].basin_id}, stats);
      nse_value = ev.report.median.nse.value_or(-INFINITY);
      if (nse_value > 0.95) break;
    }
    const bool hit = nse_value > 0.95;
    reached += hit ? 1 : 0;
    detail += " seed " + std::to_string(seed) + (hit ? " epoch " + std::to_string(e) : " no") + " (NSE " +
              num(nse_value, 4) + ")";
  }
  return {reached >= 4, std::to_string(reached) + "/5 seeds above 0.95; " + detail};
}

// ---------------------------------------------------------------- 6

Outcome discriminator_sanity() {
  const auto data = fixtures::tiny_experiment(3, 10, 1);
  const TrainConfig defaults;
  double lo = INFINITY, hi = -INFINITY;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rngs = RngStreams::from_seed(seed);
    GeneratorConfig g{data.dynamic_columns.size(), data.static_columns.size(), defaults.hidden_size,
                      defaults.embedding_width, defaults.attention_width, defaults.dropout, defaults.scoring};
    auto m = AdversarialModel::init(g, defaults.latent_width, defaults.discriminator_hidden, rngs);
    std::vector<std::size_t> si(64), ti(64);
    for (std::size_t i = 0; i < 64; ++i) {
      si[i] = rngs.shuffle_source() % data.source.train.size();
      ti[i] = rngs.shuffle_target() % data.target.train.size();
    }
    NoGradGuard no_grad;
    auto fs_ = generator_forward(m.source, make_batch(data.source.train, si), ForwardMode::kEval, rngs.dropout_source, false);
    auto ft = generator_forward(m.target, make_batch(data.target.train, ti), ForwardMode::kEval, rngs.dropout_target, false);
    auto cs = stacked_contexts(fs_), ct = stacked_contexts(ft);
    auto features = project_shared(m.projection, concat({cs, ct}, 0));
    const double ld = bce_with_logits(discriminator_logits(m.discriminator, features),
                                      domain_labels(cs.dim(0), ct.dim(0)))
                          .item();
    lo = std::min(lo, ld);
    hi = std::max(hi, ld);
  }

  Rng rng(606);
  std::normal_distribution<double> noise(0.0, 0.3);
  const std::size_t latent = defaults.latent_width, rows = 64;
  std::vector<double> feats(2 * rows * latent);
  for (std::size_t r = 0; r < 2 * rows; ++r) {
    const double side = r < rows ? 1.0 : -1.0;
    for (std::size_t j = 0; j < latent; ++j) feats[r * latent + j] = side * (j % 2 == 0 ? 0.5 : -0.5) + noise(rng);
  }
  Tensor features({2 * rows, latent}, feats);
  Tensor labels = domain_labels(rows, rows);
  auto disc = DiscriminatorNetwork::init(latent, defaults.discriminator_hidden, rng);
  ParamGroup group{"discriminator", tensors_of(disc.named_parameters("d")), {}};
  for (int i = 0; i < 50; ++i) {
    discriminator_step(disc, group, features, labels, defaults.lr_first_epoch, defaults.clip_norm);
  }
  const double acc = domain_accuracy(discriminator_logits(disc, features), labels);
  return {lo >= 0.55 && hi <= 0.85 && acc > 0.95, "initial L_D over 10 seeds in [" + num(lo, 4) + ", " + num(hi, 4) +
                                                      "]; accuracy after 50 D steps " + num(acc, 4)};
}

// ---------------------------------------------------------------- 7

Outcome synthetic_replication() {
  SynthConfig sc;  // 20 source and 8 target basins, shift 0.5, 10% missing target flow
  sc.seed = 2024;
  const auto ds = synth_generate(sc);
  // Reduced width and a 7-day training stride keep five seeds of both models inside the time budget.
  const std::size_t history = 30, stride = 7, width = 16;
  const auto data = prepare_experiment(ds.source, ds.target, SplitRanges::defaults(), {history, 1, stride}, 1, 1);
  std::cerr << "criterion 7: windows source " << data.source.train.size() << ", target train "
            << data.target.train.size() << ", validation " << data.target.validation.size() << ", test "
            << data.target.test.size() << "\n";

  double adv_total = 0, tl_total = 0;
  int dominated = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<double> medians;
    std::vector<std::vector<double>> curves;
    for (auto mode : {TrainMode::kAdversarial, TrainMode::kSeq2SeqTl}) {
      TrainConfig c;
      c.mode = mode;
      c.hidden_size = width;
      c.latent_width = width;
      c.discriminator_hidden = width;
      c.history = history;
      c.stride = stride;
      c.epochs = 100;
      c.seed = seed;
      TrainingSession s(c, data);
      s.run();
      const auto ev = s.evaluate_best_target_test();
      medians.push_back(ev.report.median.nse.value_or(NAN));
      std::vector<double> tail;
      for (std::size_t i = s.log().size() - 20; i < s.log().size(); ++i) tail.push_back(s.log()[i].val_nse.value_or(NAN));
      curves.push_back(tail);
      std::cerr << "criterion 7: seed " << seed << " " << to_string(mode) << " test median NSE " << medians.back()
                << " (best epoch " << s.best_epoch() << ")\n";
    }
    adv_total += medians[0];
    tl_total += medians[1];
    bool dominates = true;
    for (std::size_t i = 0; i < 20; ++i) dominates = dominates && curves[0][i] >= curves[1][i];
    dominated += dominates ? 1 : 0;
    detail += " seed " + std::to_string(seed) + " " + num(medians[0], 4) + "/" + num(medians[1], 4) +
              (dominates ? " dom" : "");
  }
  const double adv = adv_total / 5, tl = tl_total / 5;
  return {adv >= tl && dominated >= 4, "mean-of-median target test NSE adversarial " + num(adv, 4) +
                                           " vs Seq2Seq-TL " + num(tl, 4) + "; validation curve dominates in " +
                                           std::to_string(dominated) + "/5 seeds;" + detail};
}

// ---------------------------------------------------------------- 8

Outcome determinism_and_persistence() {
  const auto data = fixtures::tiny_experiment();
  bool logs_equal = true, predict_equal = true;
  double resume_diff = 0;
  bool resume_entries_equal = true;
  const fs::path dir = fs::temp_directory_path() / ("flowda_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  for (auto mode : {TrainMode::kAdversarial, TrainMode::kSeq2SeqTl, TrainMode::kLstmTl}) {
    const auto cfg = fixtures::tiny_config(mode);
    TrainingSession a(cfg, data), b(cfg, data);
    a.run();
    b.run();
    std::string la, lb;
    for (const auto& e : a.log()) la += to_json(e).dump() + "\n";
    for (const auto& e : b.log()) lb += to_json(e).dump() + "\n";
    logs_equal = logs_equal && la == lb;

    const auto before = a.evaluate_target_test();
    save_checkpoint(dir / "ck.bin", a.to_checkpoint());
    const auto loaded = load_checkpoint(dir / "ck.bin");
    const ModelSet models = models_from_checkpoint(loaded);
    const auto after = evaluate(models.target_predictor(), data.target.test, data.target.basin_ids,
                                loaded.target_stats, {256, cfg.seed});
    predict_equal = predict_equal && before.predictions.size() == after.predictions.size();
    for (std::size_t i = 0; predict_equal && i < before.predictions.size(); ++i) {
      predict_equal = std::memcmp(&before.predictions[i].predicted, &after.predictions[i].predicted, sizeof(double)) == 0;
    }

    for (std::size_t k = 1; k < a.total_epochs(); ++k) {
      TrainingSession first(cfg, data);
      for (std::size_t i = 0; i < k; ++i) first.step();
      save_checkpoint(dir / "resume.bin", first.to_checkpoint());
      TrainingSession resumed(cfg, data);
      resumed.restore(load_checkpoint(dir / "resume.bin"));
      resumed.run();
      for (std::size_t i = k; i < a.log().size(); ++i) {
        const auto& x = resumed.log()[i];
        const auto& y = a.log()[i];
        for (auto [p, q] : {std::pair{x.loss_gs, y.loss_gs}, {x.loss_gt, y.loss_gt}, {x.loss_d, y.loss_d},
                            {x.val_nse.value_or(0), y.val_nse.value_or(0)}}) {
          if (std::isnan(p) != std::isnan(q)) resume_entries_equal = false;
          if (!std::isnan(p)) resume_diff = std::max(resume_diff, std::abs(p - q));
        }
      }
    }
  }
  fs::remove_all(dir);
  const bool ok = logs_equal && predict_equal && resume_entries_equal && resume_diff <= 1e-12;
  return {ok, std::string("three modes: logs bit-identical ") + (logs_equal ? "yes" : "no") +
                  ", save/load/predict bit-exact " + (predict_equal ? "yes" : "no") +
                  ", resume at every k max |diff| " + num(resume_diff, 3)};
}

// ---------------------------------------------------------------- 9

Outcome data_pipeline() {
  SynthConfig sc;
  sc.n_source_basins = 2;
  sc.n_target_basins = 4;
  sc.seed = 99;
  const auto ds = synth_generate(sc);
  const fs::path dir = fs::temp_directory_path() / ("flowda_acceptance_data_" + std::to_string(::getpid()));
  write_domain(dir, ds.target);
  const auto loaded = load_domain(dir);
  bool round_trip = loaded.basins.size() == ds.target.basins.size();
  for (std::size_t i = 0; round_trip && i < loaded.basins.size(); ++i) {
    const auto& x = loaded.basins[i];
    const auto& y = ds.target.basins[i];
    round_trip = x.start == y.start && x.mask == y.mask && x.dynamic_valid == y.dynamic_valid &&
                 std::memcmp(x.dynamic.data(), y.dynamic.data(), y.dynamic.size() * sizeof(double)) == 0 &&
                 std::memcmp(x.streamflow.data(), y.streamflow.data(), y.streamflow.size() * sizeof(double)) == 0;
  }
  fs::remove_all(dir);

  // With tau = 1 and complete forcings a window is dropped exactly when its target is missing.
  const auto stats = compute_norm_stats(ds.target.basins, ds.target.statics);
  const std::size_t n = 30;
  const auto windows = make_domain_windows(ds.target, stats, {n, 1, 1});
  const double possible = static_cast<double>(ds.target.basins.size() * (sc.length_days - n));
  const double dropped = 1.0 - static_cast<double>(windows.size()) / possible;
  const bool fraction_ok = std::abs(dropped - sc.missing_rate) <= 0.02;

  const auto ranges = SplitRanges::defaults();
  auto base = prepare_experiment(ds.source, ds.target, ranges, {n, 1, 1});
  auto changed_target = ds.target;
  auto changed_source = ds.source;
  for (auto* domain : {&changed_target, &changed_source}) {
    for (auto& b : domain->basins) {
      for (std::size_t t = 0; t < b.length(); ++t) {
        if (b.date(t) < ranges.test.first || b.date(t) > ranges.test.last) continue;
        b.streamflow[t] = b.streamflow[t] * 3.0 + 7.0;
        for (auto& v : std::span(b.dynamic).subspan(t * b.dynamic_width(), b.dynamic_width())) v = v * 2.0 - 1.0;
      }
    }
  }
  auto other = prepare_experiment(changed_source, changed_target, ranges, {n, 1, 1});
  auto same_windows = [](const std::vector<WindowSample>& x, const std::vector<WindowSample>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].history != y[i].history || x[i].targets != y[i].targets || x[i].statics != y[i].statics ||
          x[i].last_observed_y != y[i].last_observed_y || x[i].flow_variance != y[i].flow_variance) {
        return false;
      }
    }
    return true;
  };
  const bool no_leak = same_windows(base.source.train, other.source.train) &&
                       same_windows(base.target.train, other.target.train) &&
                       base.target.stats.flow_mean == other.target.stats.flow_mean &&
                       base.target.stats.dynamic.mean == other.target.stats.dynamic.mean &&
                       !same_windows(base.target.test, other.target.test);

  const auto parts = split_by_dates(ds.target.basins.front(), ranges);
  auto span_of = [](const std::optional<BasinSeries>& s) {
    return s ? format_date(s->start) + ".." + format_date(s->date(s->length() - 1)) : std::string("none");
  };
  const bool dates_ok = span_of(parts.train) == "1999-10-01..2000-09-30" &&
                        span_of(parts.validation) == "1988-10-01..1989-09-30" &&
                        span_of(parts.test) == "1989-10-01..1999-09-30";
  return {round_trip && fraction_ok && no_leak && dates_ok,
          std::string("CSV round trip bit-exact ") + (round_trip ? "yes" : "no") + ", dropped fraction " +
              num(dropped, 4) + " vs 0.1, training windows unaffected by test data " + (no_leak ? "yes" : "no") +
              ", splits train " + span_of(parts.train) + " validation " + span_of(parts.validation) + " test " +
              span_of(parts.test)};
}

// ---------------------------------------------------------------- 10

Outcome lr_schedule_values() {
  bool ok = lr_schedule(1) == 0.001;
  for (std::size_t e = 2; e <= 100; ++e) ok = ok && lr_schedule(e) == 0.0005;
  const TrainConfig defaults;
  ok = ok && defaults.lr_first_epoch == 0.001 && defaults.lr_rest == 0.0005;
  // The schedule as seen by a training run.
  const auto data = fixtures::tiny_experiment();
  auto c = fixtures::tiny_config(TrainMode::kAdversarial);
  c.epochs = 4;
  TrainingSession s(c, data);
  s.run();
  for (const auto& e : s.log()) ok = ok && e.lr == (e.epoch == 1 ? 0.001 : 0.0005);
  return {ok, "epoch 1 -> " + num(lr_schedule(1)) + ", epochs 2..100 -> " + num(lr_schedule(2)) + " .. " +
                  num(lr_schedule(100))};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "gradient correctness", gradient_correctness},
      {2, "metric oracles", metric_oracles},
      {3, "attention invariants", attention_invariants},
      {4, "adversarial sign structure", sign_structure},
      {5, "overfit capability", overfit_capability},
      {6, "discriminator sanity", discriminator_sanity},
      {7, "synthetic comparison with Seq2Seq-TL", synthetic_replication},
      {8, "determinism and persistence", determinism_and_persistence},
      {9, "data pipeline", data_pipeline},
      {10, "learning-rate schedule", lr_schedule_values},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << ", " << num(secs, 3)
              << " s): " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
