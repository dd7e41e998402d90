#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/metrics/losses.hpp"
#include "flowda/model.hpp"
#include "flowda/training/optim.hpp"
#include "flowda/training/schedule.hpp"

namespace flowda {

/// Both private generators, the shared projection and the discriminator.
struct AdversarialModel {
  GeneratorNetwork source;
  GeneratorNetwork target;
  SharedProjection projection;
  DiscriminatorNetwork discriminator;

  static AdversarialModel init(const GeneratorConfig& gen, std::size_t latent_width, std::size_t disc_hidden,
                               RngStreams& rngs) {
    AdversarialModel m;
    m.source = GeneratorNetwork::init(gen, rngs.init_source);
    m.target = GeneratorNetwork::init(gen, rngs.init_target);
    m.projection = SharedProjection::init(gen.hidden, latent_width, rngs.init_shared);
    m.discriminator = DiscriminatorNetwork::init(latent_width, disc_hidden, rngs.init_shared);
    return m;
  }
};

/// Optimizer groups of an adversarial model. Generator groups are clipped
/// separately so that each domain's update depends on its own gradient only.
struct AdversarialGroups {
  ParamGroup source, target, projection, discriminator;

  static AdversarialGroups make(const AdversarialModel& m) {
    return {{"source", tensors_of(m.source.named_parameters("source")), {}},
            {"target", tensors_of(m.target.named_parameters("target")), {}},
            {"projection", tensors_of(m.projection.named_parameters("projection")), {}},
            {"discriminator", tensors_of(m.discriminator.named_parameters("discriminator")), {}}};
  }

  std::vector<ParamGroup*> all() { return {&source, &target, &projection, &discriminator}; }
};

struct StepSettings {
  double lr = 0.001;
  double lambda = 0.1;
  double clip_norm = 1.0;
  double loss_epsilon = 0.1;
};

struct DiscriminatorStepResult {
  double loss = 0.0;      // before the update
  double accuracy = 0.0;  // before the update
};

/// Fraction of rows whose logit sign matches the label (source = positive).
inline double domain_accuracy(const Tensor& logits, const Tensor& labels) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    const bool says_source = logits[i] > 0.0;
    hits += says_source == (labels[i] == kSourceLabel) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.numel());
}

/// One Adam step on theta_D minimizing BCE on fixed features. Touches only
/// the discriminator group.
inline DiscriminatorStepResult discriminator_step(const DiscriminatorNetwork& disc, ParamGroup& group,
                                                  const Tensor& features, const Tensor& labels, double lr,
                                                  double clip_norm) {
  GradientTape tape;
  Tensor input = features.detach();
  Tensor logits = discriminator_logits(disc, input);
  Tensor loss = bce_with_logits(logits, labels);
  DiscriminatorStepResult out{loss.item(), domain_accuracy(logits, labels)};
  if (!std::isfinite(out.loss)) throw NumericError("non-finite discriminator loss");
  tape.backward(loss);
  group.apply(lr, clip_norm);
  return out;
}

inline Tensor generator_loss(const ForecastOutput& f, const Batch& batch, double epsilon) {
  return nse_loss(f.predictions, batch.targets_tensor(), batch.mask_tensor(), batch.flow_variance, epsilon);
}

struct AdversarialStepResult {
  double loss_gs = 0.0;
  double loss_gt = 0.0;
  double loss_d = 0.0;
  double disc_accuracy = 0.0;
};

/**
 * One batch pair: forward both generators once, take a discriminator step on
 * the detached shared features, then update the generators and projection
 * on L_GS + L_GT - lambda * L_D with the refreshed discriminator held fixed.
 */
inline AdversarialStepResult adversarial_step(AdversarialModel& m, AdversarialGroups& groups, const Batch& source,
                                              const Batch& target, const StepSettings& s, DomainRngs rngs) {
  GradientTape tape;
  auto fs = generator_forward(m.source, source, ForwardMode::kTrain, rngs.source, true);
  auto ft = generator_forward(m.target, target, ForwardMode::kTrain, rngs.target, true);
  Tensor ls = generator_loss(fs, source, s.loss_epsilon);
  Tensor lt = generator_loss(ft, target, s.loss_epsilon);

  AdversarialStepResult out;
  out.loss_gs = ls.item();
  out.loss_gt = lt.item();
  Tensor cs = stacked_contexts(fs);
  Tensor ct = stacked_contexts(ft);
  Tensor features = project_shared(m.projection, concat({cs, ct}, 0));
  Tensor labels = domain_labels(cs.dim(0), ct.dim(0));
  auto d = discriminator_step(m.discriminator, groups.discriminator, features, labels, s.lr, s.clip_norm);
  out.loss_d = d.loss;
  out.disc_accuracy = d.accuracy;

  Tensor total = add(ls, lt);
  if (s.lambda > 0.0) {
    Tensor ld = bce_with_logits(discriminator_logits(m.discriminator, features), labels);
    total = sub(total, scale(ld, s.lambda));
  }
  if (!std::isfinite(total.item())) throw NumericError("non-finite generator loss");
  tape.backward(total);
  groups.source.apply(s.lr, s.clip_norm);
  groups.target.apply(s.lr, s.clip_norm);
  groups.projection.apply(s.lr, s.clip_norm);
  groups.discriminator.zero_grad();
  return out;
}

/// Per-epoch means. Fields a mode does not produce stay NaN.
struct EpochStats {
  double loss_gs = std::numeric_limits<double>::quiet_NaN();
  double loss_gt = std::numeric_limits<double>::quiet_NaN();
  double loss_d = std::numeric_limits<double>::quiet_NaN();
  double loss_d_start = std::numeric_limits<double>::quiet_NaN();
  double disc_accuracy = std::numeric_limits<double>::quiet_NaN();
  std::size_t steps = 0;
};

inline EpochStats adversarial_epoch(AdversarialModel& m, AdversarialGroups& groups,
                                    const std::vector<WindowSample>& source, const std::vector<WindowSample>& target,
                                    std::span<const BatchPair> schedule, const StepSettings& s, DomainRngs rngs) {
  if (source.empty() || target.empty()) throw std::invalid_argument("adversarial_epoch: both domains need windows");
  if (schedule.empty()) throw std::invalid_argument("adversarial_epoch: empty schedule");
  double gs = 0.0, gt = 0.0, ld = 0.0, acc = 0.0;
  EpochStats out;
  for (const auto& pair : schedule) {
    auto r = adversarial_step(m, groups, make_batch(source, pair.source), make_batch(target, pair.target), s, rngs);
    if (out.steps == 0) out.loss_d_start = r.loss_d;
    gs += r.loss_gs;
    gt += r.loss_gt;
    ld += r.loss_d;
    acc += r.disc_accuracy;
    ++out.steps;
  }
  const double n = static_cast<double>(out.steps);
  out.loss_gs = gs / n;
  out.loss_gt = gt / n;
  out.loss_d = ld / n;
  out.disc_accuracy = acc / n;
  return out;
}

/// Mean supervised loss of one generator over the given batches.
inline double supervised_epoch(GeneratorNetwork& gen, ParamGroup& group, const std::vector<WindowSample>& windows,
                               std::span<const std::vector<std::size_t>> batches, const StepSettings& s, Rng& rng) {
  if (windows.empty()) throw std::invalid_argument("supervised_epoch: no windows");
  if (batches.empty()) throw std::invalid_argument("supervised_epoch: empty schedule");
  double total = 0.0;
  for (const auto& idx : batches) {
    Batch b = make_batch(windows, idx);
    GradientTape tape;
    auto f = generator_forward(gen, b, ForwardMode::kTrain, rng, true);
    Tensor loss = generator_loss(f, b, s.loss_epsilon);
    if (!std::isfinite(loss.item())) throw NumericError("non-finite generator loss");
    total += loss.item();
    tape.backward(loss);
    group.apply(s.lr, s.clip_norm);
  }
  return total / static_cast<double>(batches.size());
}

inline double regressor_epoch(LstmRegressor& model, ParamGroup& group, const std::vector<WindowSample>& windows,
                              std::span<const std::vector<std::size_t>> batches, const StepSettings& s, Rng& rng) {
  if (windows.empty()) throw std::invalid_argument("regressor_epoch: no windows");
  if (batches.empty()) throw std::invalid_argument("regressor_epoch: empty schedule");
  double total = 0.0;
  for (const auto& idx : batches) {
    Batch b = make_batch(windows, idx);
    GradientTape tape;
    Tensor pred = regressor_forward(model, b, ForwardMode::kTrain, rng);
    Tensor loss = nse_loss(pred, b.targets_tensor(), b.mask_tensor(), b.flow_variance, s.loss_epsilon);
    if (!std::isfinite(loss.item())) throw NumericError("non-finite regressor loss");
    total += loss.item();
    tape.backward(loss);
    group.apply(s.lr, s.clip_norm);
  }
  return total / static_cast<double>(batches.size());
}

}  // namespace flowda
