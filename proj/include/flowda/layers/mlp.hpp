#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowda/layers/dropout.hpp"
#include "flowda/layers/init.hpp"
#include "flowda/numerics/ops.hpp"

namespace flowda {

enum class Activation { kLinear, kTanh, kRelu, kSigmoid };

inline Tensor activate(Activation kind, const Tensor& x) {
  switch (kind) {
    case Activation::kLinear: return x;
    case Activation::kTanh: return flowda::tanh(x);
    case Activation::kRelu: return relu(x);
    case Activation::kSigmoid: return sigmoid(x);
  }
  return x;
}

using NamedTensor = std::pair<std::string, Tensor>;

/// Stack of affine layers; hidden layers are followed by `hidden_activation`,
/// the last layer is affine only.
struct MlpParams {
  std::vector<std::size_t> widths;  // widths[0] is the input width
  std::vector<Tensor> weights;      // weights[i] is [widths[i+1] x widths[i]]
  std::vector<Tensor> biases;
  Activation hidden_activation = Activation::kTanh;

  static MlpParams init(std::vector<std::size_t> widths, Activation hidden, Rng& rng) {
    if (widths.size() < 2) throw std::invalid_argument("an MLP needs at least an input and an output width");
    MlpParams p;
    p.widths = std::move(widths);
    p.hidden_activation = hidden;
    for (std::size_t i = 0; i + 1 < p.widths.size(); ++i) {
      p.weights.push_back(glorot_uniform(p.widths[i + 1], p.widths[i], rng));
      p.biases.push_back(zero_parameter({p.widths[i + 1]}));
    }
    return p;
  }

  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }

  void validate() const {
    if (weights.size() + 1 != widths.size() || biases.size() != weights.size()) {
      throw DimensionError("MLP layer count does not match its widths");
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i].shape() != Shape{widths[i + 1], widths[i]} || biases[i].numel() != widths[i + 1]) {
        throw DimensionError("MLP layer " + std::to_string(i) + " does not chain: weight " +
                             shape_string(weights[i].shape()));
      }
    }
  }

  std::vector<NamedTensor> named_parameters(const std::string& prefix) const {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      out.emplace_back(prefix + ".w" + std::to_string(i), weights[i]);
      out.emplace_back(prefix + ".b" + std::to_string(i), biases[i]);
    }
    return out;
  }
};

/// Rows of x [R x in] through the MLP. Hidden activations get dropout when
/// `dropout` is in train mode.
inline Tensor mlp_forward(const MlpParams& params, const Tensor& x, const DropoutSpec& dropout_spec, Rng& rng) {
  if (x.rank() != 2 || x.dim(1) != params.input_width()) {
    throw DimensionError("mlp_forward: input " + shape_string(x.shape()) + " but the MLP expects width " +
                         std::to_string(params.input_width()));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    h = linear(h, params.weights[i], params.biases[i]);
    if (i + 1 < params.weights.size()) {
      h = activate(params.hidden_activation, h);
      h = dropout(dropout_spec, h, rng);
    }
  }
  return h;
}

inline Tensor mlp_forward(const MlpParams& params, const Tensor& x) {
  Rng unused(0);
  return mlp_forward(params, x, DropoutSpec{}, unused);
}

}  // namespace flowda
