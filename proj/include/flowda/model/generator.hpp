#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/layers.hpp"
#include "flowda/model/batch.hpp"

namespace flowda {

struct GeneratorConfig {
  std::size_t dynamic_width = 0;
  std::size_t static_width = 0;
  std::size_t hidden = 128;
  std::size_t embedding_width = 0;  // 0: same as hidden
  std::size_t attention_width = 0;  // 0: same as hidden
  double dropout = 0.4;
  AttentionScoring scoring = AttentionScoring::kAdditive;

  std::size_t embedding() const { return embedding_width ? embedding_width : hidden; }
  std::size_t attention() const { return attention_width ? attention_width : hidden; }
};

/**
 * One private sequence generator: embedding MLP, encoder LSTM, additive
 * attention, decoder LSTM fed concat(previous y, context), affine head.
 */
struct GeneratorNetwork {
  GeneratorConfig config;
  MlpParams embedding;
  LstmParams encoder;
  AttentionParams attention;
  LstmParams decoder;
  Tensor head_weight;  // [1 x hidden]
  Tensor head_bias;    // [1]

  static GeneratorNetwork init(const GeneratorConfig& config, Rng& rng) {
    if (config.dynamic_width + config.static_width == 0 || config.hidden == 0) {
      throw std::invalid_argument("generator needs positive input and hidden widths");
    }
    GeneratorNetwork g;
    g.config = config;
    const std::size_t e = config.embedding();
    g.embedding = MlpParams::init({config.dynamic_width + config.static_width, e, e}, Activation::kTanh, rng);
    g.encoder = LstmParams::init(e, config.hidden, rng);
    g.attention = AttentionParams::init(config.hidden, config.hidden, config.attention(), rng, config.scoring);
    g.decoder = LstmParams::init(1 + config.hidden, config.hidden, rng);
    g.head_weight = glorot_uniform(1, config.hidden, rng);
    g.head_bias = zero_parameter({1});
    return g;
  }

  void validate() const {
    embedding.validate();
    encoder.validate();
    attention.validate();
    decoder.validate();
    if (embedding.output_width() != encoder.input_width()) {
      throw DimensionError("embedding width " + std::to_string(embedding.output_width()) +
                           " does not match encoder input " + std::to_string(encoder.input_width()));
    }
    if (decoder.input_width() != 1 + encoder.hidden) {
      throw DimensionError("decoder input must be 1 + context width");
    }
  }

  DropoutSpec dropout_spec(ForwardMode mode) const { return {config.dropout, mode}; }

  std::vector<NamedTensor> named_parameters(const std::string& prefix) const {
    std::vector<NamedTensor> out = embedding.named_parameters(prefix + ".embedding");
    for (auto&& list : {encoder.named_parameters(prefix + ".encoder"), attention.named_parameters(prefix + ".attention"),
                        decoder.named_parameters(prefix + ".decoder")}) {
      out.insert(out.end(), list.begin(), list.end());
    }
    out.emplace_back(prefix + ".head.w", head_weight);
    out.emplace_back(prefix + ".head.b", head_bias);
    return out;
  }
};

/// Per-step embeddings x_n = MLP(concat(dynamic_n, static)), each [B x e].
inline std::vector<Tensor> embed_inputs(const GeneratorNetwork& gen, const Batch& batch, ForwardMode mode, Rng& rng) {
  const std::size_t b = batch.size, n = batch.history, d = batch.dynamic_width, s = batch.static_width;
  if (d + s != gen.embedding.input_width()) {
    throw DimensionError("embed_inputs: " + std::to_string(d) + " dynamic + " + std::to_string(s) +
                         " static features but the embedding expects " + std::to_string(gen.embedding.input_width()));
  }
  if (n == 0) throw std::invalid_argument("embed_inputs: empty history");
  // Time-major rows: row t*B + i holds window i at step t.
  std::vector<double> rows;
  rows.reserve(n * b * (d + s));
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < b; ++i) {
      const double* dyn = &batch.dynamic[(i * n + t) * d];
      rows.insert(rows.end(), dyn, dyn + d);
      rows.insert(rows.end(), batch.statics.begin() + static_cast<std::ptrdiff_t>(i * s),
                  batch.statics.begin() + static_cast<std::ptrdiff_t>((i + 1) * s));
    }
  }
  Tensor embedded = mlp_forward(gen.embedding, Tensor({n * b, d + s}, std::move(rows)), gen.dropout_spec(mode), rng);
  std::vector<Tensor> steps;
  steps.reserve(n);
  for (std::size_t t = 0; t < n; ++t) steps.push_back(narrow(embedded, 0, t * b, b));
  return steps;
}

/// Single window form: dynamic [N x d_dyn], static [d_stat] -> [N x e].
inline Tensor embed_inputs(const GeneratorNetwork& gen, const Tensor& dynamic, const Tensor& statics) {
  if (dynamic.rank() != 2) throw DimensionError("embed_inputs: dynamic must be [N x d]");
  Batch b;
  b.size = 1;
  b.history = dynamic.dim(0);
  b.dynamic_width = dynamic.dim(1);
  b.static_width = statics.numel();
  b.dynamic.assign(dynamic.data().begin(), dynamic.data().end());
  b.statics.assign(statics.data().begin(), statics.data().end());
  Rng unused(0);
  auto steps = embed_inputs(gen, b, ForwardMode::kEval, unused);
  return concat(steps, 0);
}

struct EncoderOutput {
  std::vector<Tensor> states;  // hbar_s, one [B x h] per step, after dropout
  LstmState final;             // terminal (h, c), no dropout
};

inline EncoderOutput encode(const GeneratorNetwork& gen, std::span<const Tensor> embedded, ForwardMode mode, Rng& rng) {
  if (embedded.empty()) throw std::invalid_argument("encode: N must be at least 1");
  auto seq = lstm_sequence(gen.encoder, embedded, LstmState::zeros(embedded.front().dim(0), gen.encoder.hidden));
  EncoderOutput out;
  out.final = seq.final;
  const auto spec = gen.dropout_spec(mode);
  out.states.reserve(seq.hidden.size());
  for (auto& h : seq.hidden) out.states.push_back(dropout(spec, h, rng));
  return out;
}

/// Teacher values for decoding; masked entries fall back to the model's own prediction.
struct TeacherTargets {
  Tensor values;  // [B x tau]
  Tensor mask;    // [B x tau], 1 = observed
};

struct ForecastOutput {
  Tensor predictions;              // [B x tau]
  std::vector<Tensor> contexts;    // tau x [B x h]
  std::vector<Tensor> attention;   // tau x [B x N]

  std::size_t horizon() const { return contexts.size(); }
};

/**
 * Decoder loop. Step k attends with the previous decoder state, feeds
 * concat(prev_y, c_k) to the decoder cell and maps h_k to y_k. prev_y is
 * last_observed_y at k = 1, then the teacher value or the model's own output.
 */
inline ForecastOutput decode_forecast(const GeneratorNetwork& gen, const AttentionKeys& keys, const LstmState& initial,
                                      const Tensor& last_y, std::size_t horizon,
                                      const std::optional<TeacherTargets>& teacher = std::nullopt) {
  if (horizon == 0) throw std::invalid_argument("decode_forecast: horizon must be at least 1");
  const std::size_t b = keys.states.dim(0);
  if (last_y.shape() != Shape{b, 1}) throw DimensionError("decode_forecast: last_y must be [B x 1]");
  if (teacher && (teacher->values.shape() != Shape{b, horizon} || teacher->mask.shape() != Shape{b, horizon})) {
    throw std::invalid_argument("decode_forecast: teacher targets must be [" + std::to_string(b) + " x " +
                                std::to_string(horizon) + "], got " + shape_string(teacher->values.shape()));
  }
  ForecastOutput out;
  std::vector<Tensor> steps;
  LstmState state = initial;
  Tensor prev_y = last_y;
  for (std::size_t k = 0; k < horizon; ++k) {
    if (k > 0) {
      const Tensor& own = steps.back();
      if (teacher) {
        std::vector<double> inv(b), fixed(b);
        bool all_observed = true;
        for (std::size_t i = 0; i < b; ++i) {
          const double keep = teacher->mask.at({i, k - 1}) != 0.0 ? 1.0 : 0.0;
          inv[i] = 1.0 - keep;
          fixed[i] = keep * teacher->values.at({i, k - 1});
          all_observed = all_observed && keep != 0.0;
        }
        Tensor fixed_t({b, 1}, fixed);
        prev_y = all_observed ? fixed_t : add(mul(own, Tensor({b, 1}, inv)), fixed_t);
      } else {
        prev_y = own;
      }
    }
    auto att = attend(gen.attention, state.h, keys);
    state = lstm_cell_step(gen.decoder, concat({prev_y, att.context}, 1), state.h, state.c);
    steps.push_back(linear(state.h, gen.head_weight, gen.head_bias));
    out.contexts.push_back(att.context);
    out.attention.push_back(att.weights);
  }
  out.predictions = horizon == 1 ? steps.front() : concat(steps, 1);
  return out;
}

/// Full pass over a batch: embed, encode, decode. Teacher forcing only when asked.
inline ForecastOutput generator_forward(const GeneratorNetwork& gen, const Batch& batch, ForwardMode mode, Rng& rng,
                                        bool teacher_forcing) {
  auto embedded = embed_inputs(gen, batch, mode, rng);
  auto enc = encode(gen, embedded, mode, rng);
  auto keys = prepare_keys(gen.attention, stack(enc.states, 1));
  std::optional<TeacherTargets> teacher;
  if (teacher_forcing) teacher = TeacherTargets{batch.targets_tensor(), batch.mask_tensor()};
  return decode_forecast(gen, keys, enc.final, batch.last_y_tensor(), batch.horizon, teacher);
}

/// All contexts of a forecast as rows [tau*B x h], step-major.
inline Tensor stacked_contexts(const ForecastOutput& f) {
  return f.contexts.size() == 1 ? f.contexts.front() : concat(f.contexts, 0);
}

}  // namespace flowda
