#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/layers.hpp"
#include "flowda/model/generator.hpp"

namespace flowda {

/// Domain label written to every checkpoint: source windows are class 1.
inline constexpr double kSourceLabel = 1.0;
inline constexpr double kTargetLabel = 0.0;
inline constexpr const char* kLabelConvention = "source=1,target=0";

/// h_c = tanh(W c + b), one instance shared by both domains.
struct SharedProjection {
  Tensor weight;  // [latent x context]
  Tensor bias;    // [latent]

  static SharedProjection init(std::size_t context_width, std::size_t latent_width, Rng& rng) {
    return {glorot_uniform(latent_width, context_width, rng), zero_parameter({latent_width})};
  }

  std::size_t input_width() const { return weight.dim(1); }
  std::size_t latent_width() const { return weight.dim(0); }

  std::vector<NamedTensor> named_parameters(const std::string& prefix) const {
    return {{prefix + ".w", weight}, {prefix + ".b", bias}};
  }
};

inline Tensor project_shared(const SharedProjection& proj, const Tensor& contexts) {
  if (contexts.rank() != 2 || contexts.dim(1) != proj.input_width()) {
    throw DimensionError("project_shared: context " + shape_string(contexts.shape()) + " but projection expects width " +
                         std::to_string(proj.input_width()));
  }
  return flowda::tanh(linear(contexts, proj.weight, proj.bias));
}

/// Binary domain classifier D = MLP(h_c) ending in one logit.
struct DiscriminatorNetwork {
  MlpParams mlp;

  static DiscriminatorNetwork init(std::size_t latent_width, std::size_t hidden_width, Rng& rng) {
    return {MlpParams::init({latent_width, hidden_width, 1}, Activation::kTanh, rng)};
  }

  std::vector<NamedTensor> named_parameters(const std::string& prefix) const { return mlp.named_parameters(prefix); }
};

/// Logits [R x 1]; the discriminator runs without dropout.
inline Tensor discriminator_logits(const DiscriminatorNetwork& disc, const Tensor& features) {
  if (features.rank() != 2 || features.dim(1) != disc.mlp.input_width()) {
    throw DimensionError("discriminate: features " + shape_string(features.shape()) +
                         " but the discriminator expects width " + std::to_string(disc.mlp.input_width()));
  }
  return mlp_forward(disc.mlp, features);
}

/// P(source | h_c) in (0, 1).
inline Tensor discriminate(const DiscriminatorNetwork& disc, const Tensor& features) {
  return sigmoid(discriminator_logits(disc, features));
}

/// Labels for `source_rows` source features followed by `target_rows` target features.
inline Tensor domain_labels(std::size_t source_rows, std::size_t target_rows) {
  std::vector<double> y(source_rows, kSourceLabel);
  y.resize(source_rows + target_rows, kTargetLabel);
  return Tensor({source_rows + target_rows, 1}, std::move(y));
}

struct DomainPairOutput {
  ForecastOutput source;
  ForecastOutput target;
  Tensor features;       // h_c rows, source first
  Tensor logits;         // [R x 1]
  Tensor probabilities;  // [R x 1]
  Tensor labels;         // [R x 1]
};

struct DomainRngs {
  Rng& source;
  Rng& target;
};

/**
 * Each private generator runs on its own domain; every context vector of
 * both domains goes through the one projection and the one discriminator.
 */
inline DomainPairOutput forward_domain_pair(const GeneratorNetwork& source_gen, const GeneratorNetwork& target_gen,
                                            const SharedProjection& proj, const DiscriminatorNetwork& disc,
                                            const Batch& source_batch, const Batch& target_batch, ForwardMode mode,
                                            DomainRngs rngs, bool teacher_forcing) {
  if (source_batch.size == 0 || target_batch.size == 0) throw std::invalid_argument("forward_domain_pair: empty batch");
  DomainPairOutput out;
  out.source = generator_forward(source_gen, source_batch, mode, rngs.source, teacher_forcing);
  out.target = generator_forward(target_gen, target_batch, mode, rngs.target, teacher_forcing);
  Tensor cs = stacked_contexts(out.source);
  Tensor ct = stacked_contexts(out.target);
  out.features = project_shared(proj, concat({cs, ct}, 0));
  out.logits = discriminator_logits(disc, out.features);
  out.probabilities = sigmoid(out.logits);
  out.labels = domain_labels(cs.dim(0), ct.dim(0));
  return out;
}

}  // namespace flowda
