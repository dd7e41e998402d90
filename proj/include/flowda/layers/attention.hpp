#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/layers/init.hpp"
#include "flowda/layers/mlp.hpp"
#include "flowda/numerics/ops.hpp"

namespace flowda {

enum class AttentionScoring { kAdditive, kDot };

/// Additive score: score(h_n, hbar_s) = v . tanh(W1 h_n + W2 hbar_s).
/// Dot scoring ignores the projections and needs equal widths.
struct AttentionParams {
  Tensor decoder_projection;  // W1 [a x h_dec]
  Tensor encoder_projection;  // W2 [a x h_enc]
  Tensor score_vector;        // v  [1 x a]
  AttentionScoring scoring = AttentionScoring::kAdditive;

  static AttentionParams init(std::size_t decoder_width, std::size_t encoder_width, std::size_t attention_width,
                              Rng& rng, AttentionScoring scoring = AttentionScoring::kAdditive) {
    AttentionParams p;
    p.decoder_projection = glorot_uniform(attention_width, decoder_width, rng);
    p.encoder_projection = glorot_uniform(attention_width, encoder_width, rng);
    p.score_vector = glorot_uniform(1, attention_width, rng);
    p.scoring = scoring;
    return p;
  }

  std::size_t width() const { return score_vector.numel(); }
  std::size_t decoder_width() const { return decoder_projection.dim(1); }
  std::size_t encoder_width() const { return encoder_projection.dim(1); }

  void validate() const {
    if (decoder_projection.dim(0) != width() || encoder_projection.dim(0) != width()) {
      throw DimensionError("attention projections must share the score width " + std::to_string(width()));
    }
  }

  std::vector<NamedTensor> named_parameters(const std::string& prefix) const {
    return {{prefix + ".W1", decoder_projection}, {prefix + ".W2", encoder_projection}, {prefix + ".v", score_vector}};
  }
};

/// Encoder states with their W2 projection computed once per sequence.
struct AttentionKeys {
  Tensor states;     // [B x N x h_enc]
  Tensor projected;  // [B x N x a]; undefined for dot scoring
};

inline AttentionKeys prepare_keys(const AttentionParams& params, const Tensor& states) {
  if (states.rank() != 3 || states.dim(2) != params.encoder_width()) {
    throw DimensionError("attention: encoder states " + shape_string(states.shape()) + " but expected width " +
                         std::to_string(params.encoder_width()));
  }
  AttentionKeys keys{states, Tensor()};
  if (params.scoring == AttentionScoring::kAdditive) {
    const std::size_t b = states.dim(0), n = states.dim(1);
    auto flat = reshape(states, {b * n, states.dim(2)});
    keys.projected = reshape(linear(flat, params.encoder_projection), {b, n, params.width()});
  }
  return keys;
}

struct AttentionOutput {
  Tensor weights;  // alpha [B x N]
  Tensor context;  // c_n   [B x h_enc]
};

/// Attention of decoder state h_n [B x h_dec] over the prepared encoder keys.
inline AttentionOutput attend(const AttentionParams& params, const Tensor& decoder_state, const AttentionKeys& keys) {
  const std::size_t b = keys.states.dim(0), n = keys.states.dim(1);
  if (decoder_state.shape() != Shape{b, params.decoder_width()}) {
    throw DimensionError("attend: decoder state " + shape_string(decoder_state.shape()) + " but expected [" +
                         std::to_string(b) + "x" + std::to_string(params.decoder_width()) + "]");
  }
  Tensor scores;
  if (params.scoring == AttentionScoring::kAdditive) {
    auto query = linear(decoder_state, params.decoder_projection);
    auto energy = flowda::tanh(add_broadcast(keys.projected, query, 1));
    scores = reshape(linear(reshape(energy, {b * n, params.width()}), params.score_vector), {b, n});
  } else {
    if (params.decoder_width() != params.encoder_width()) {
      throw DimensionError("dot attention needs equal decoder and encoder widths");
    }
    scores = batched_dot(keys.states, decoder_state);
  }
  auto weights = softmax(scores, 1);
  return {weights, batched_weighted_sum(weights, keys.states)};
}

/// Convenience form over a list of encoder states, each [B x h_enc].
inline AttentionOutput attend(const AttentionParams& params, const Tensor& decoder_state,
                              std::span<const Tensor> encoder_states) {
  if (encoder_states.empty()) throw std::invalid_argument("attend: no encoder states");
  return attend(params, decoder_state, prepare_keys(params, stack(encoder_states, 1)));
}

}  // namespace flowda
