#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowda/layers/init.hpp"
#include "flowda/layers/mlp.hpp"
#include "flowda/numerics/ops.hpp"

namespace flowda {

/// Single-layer LSTM. Gate blocks in W, U and b are ordered
/// [input, forget, cell, output].
struct LstmParams {
  Tensor input_weights;      // [4h x in]
  Tensor recurrent_weights;  // [4h x h]
  Tensor bias;               // [4h]
  std::size_t hidden = 0;

  static LstmParams init(std::size_t input_width, std::size_t hidden_size, Rng& rng) {
    LstmParams p;
    p.hidden = hidden_size;
    p.input_weights = glorot_uniform(4 * hidden_size, input_width, rng);
    p.recurrent_weights = glorot_uniform(4 * hidden_size, hidden_size, rng);
    std::vector<double> b(4 * hidden_size, 0.0);
    for (std::size_t i = hidden_size; i < 2 * hidden_size; ++i) b[i] = 1.0;  // forget gate
    p.bias = Tensor::vector(std::move(b), true);
    return p;
  }

  std::size_t input_width() const { return input_weights.dim(1); }

  void validate() const {
    if (input_weights.rank() != 2 || input_weights.dim(0) != 4 * hidden ||
        recurrent_weights.shape() != Shape{4 * hidden, hidden} || bias.numel() != 4 * hidden) {
      throw DimensionError("LSTM parameters inconsistent with hidden size " + std::to_string(hidden));
    }
  }

  std::vector<NamedTensor> named_parameters(const std::string& prefix) const {
    return {{prefix + ".W", input_weights}, {prefix + ".U", recurrent_weights}, {prefix + ".b", bias}};
  }
};

struct LstmState {
  Tensor h;  // [B x hidden]
  Tensor c;  // [B x hidden]

  static LstmState zeros(std::size_t batch, std::size_t hidden) {
    return {Tensor::zeros({batch, hidden}), Tensor::zeros({batch, hidden})};
  }
};

/**
 * One LSTM step for a batch of rows:
 *   i, f, o = sigmoid(.), g = tanh(.)
 *   c_t = f * c_prev + i * g
 *   h_t = o * tanh(c_t)
 */
inline LstmState lstm_cell_step(const LstmParams& params, const Tensor& x, const Tensor& h_prev, const Tensor& c_prev) {
  const std::size_t h = params.hidden;
  if (x.rank() != 2 || x.dim(1) != params.input_width()) {
    throw DimensionError("lstm_cell_step: input " + shape_string(x.shape()) + " but expected width " +
                         std::to_string(params.input_width()));
  }
  const Shape state_shape{x.dim(0), h};
  if (h_prev.shape() != state_shape || c_prev.shape() != state_shape) {
    throw DimensionError("lstm_cell_step: state shapes " + shape_string(h_prev.shape()) + "/" +
                         shape_string(c_prev.shape()) + " but expected " + shape_string(state_shape));
  }
  Tensor gates = add(linear(x, params.input_weights, params.bias), linear(h_prev, params.recurrent_weights));
  Tensor input_gate = sigmoid(narrow(gates, 1, 0, h));
  Tensor forget_gate = sigmoid(narrow(gates, 1, h, h));
  Tensor candidate = flowda::tanh(narrow(gates, 1, 2 * h, h));
  Tensor output_gate = sigmoid(narrow(gates, 1, 3 * h, h));
  Tensor c = add(mul(forget_gate, c_prev), mul(input_gate, candidate));
  Tensor hidden = mul(output_gate, flowda::tanh(c));
  return {hidden, c};
}

struct LstmSequenceOutput {
  std::vector<Tensor> hidden;  // one [B x h] per step
  LstmState final;
};

/// Folds lstm_cell_step over `inputs` left to right.
inline LstmSequenceOutput lstm_sequence(const LstmParams& params, std::span<const Tensor> inputs, LstmState initial) {
  if (inputs.empty()) throw std::invalid_argument("lstm_sequence: empty input sequence");
  LstmSequenceOutput out;
  out.hidden.reserve(inputs.size());
  LstmState state = std::move(initial);
  for (const auto& x : inputs) {
    if (x.shape() != inputs.front().shape()) {
      throw DimensionError("lstm_sequence: step width " + shape_string(x.shape()) + " differs from " +
                           shape_string(inputs.front().shape()));
    }
    state = lstm_cell_step(params, x, state.h, state.c);
    out.hidden.push_back(state.h);
  }
  out.final = state;
  return out;
}

}  // namespace flowda
