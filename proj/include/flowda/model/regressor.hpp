#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/layers.hpp"
#include "flowda/model/batch.hpp"

namespace flowda {

struct RegressorConfig {
  std::size_t dynamic_width = 0;
  std::size_t static_width = 0;
  std::size_t hidden = 128;
  std::size_t horizon = 1;
  double dropout = 0.4;
};

/// Encoder-only baseline: LSTM over concat(dynamic, static), final h -> tau outputs.
struct LstmRegressor {
  RegressorConfig config;
  LstmParams lstm;
  Tensor head_weight;  // [tau x hidden]
  Tensor head_bias;    // [tau]

  static LstmRegressor init(const RegressorConfig& config, Rng& rng) {
    if (config.horizon == 0 || config.hidden == 0) throw std::invalid_argument("regressor needs positive sizes");
    LstmRegressor r;
    r.config = config;
    r.lstm = LstmParams::init(config.dynamic_width + config.static_width, config.hidden, rng);
    r.head_weight = glorot_uniform(config.horizon, config.hidden, rng);
    r.head_bias = zero_parameter({config.horizon});
    return r;
  }

  std::vector<NamedTensor> named_parameters(const std::string& prefix) const {
    auto out = lstm.named_parameters(prefix + ".lstm");
    out.emplace_back(prefix + ".head.w", head_weight);
    out.emplace_back(prefix + ".head.b", head_bias);
    return out;
  }
};

/// Predictions [B x tau].
inline Tensor regressor_forward(const LstmRegressor& model, const Batch& batch, ForwardMode mode, Rng& rng) {
  const std::size_t b = batch.size, n = batch.history, d = batch.dynamic_width, s = batch.static_width;
  if (d + s != model.lstm.input_width()) throw DimensionError("regressor_forward: input width mismatch");
  if (batch.horizon != model.config.horizon) throw DimensionError("regressor_forward: horizon mismatch");
  std::vector<Tensor> steps;
  steps.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> rows;
    rows.reserve(b * (d + s));
    for (std::size_t i = 0; i < b; ++i) {
      const double* dyn = &batch.dynamic[(i * n + t) * d];
      rows.insert(rows.end(), dyn, dyn + d);
      rows.insert(rows.end(), batch.statics.begin() + static_cast<std::ptrdiff_t>(i * s),
                  batch.statics.begin() + static_cast<std::ptrdiff_t>((i + 1) * s));
    }
    steps.emplace_back(Shape{b, d + s}, std::move(rows));
  }
  auto seq = lstm_sequence(model.lstm, steps, LstmState::zeros(b, model.lstm.hidden));
  Tensor h = dropout(DropoutSpec{model.config.dropout, mode}, seq.final.h, rng);
  return linear(h, model.head_weight, model.head_bias);
}

}  // namespace flowda
