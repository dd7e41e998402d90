#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "flowda/numerics/tape.hpp"
#include "flowda/numerics/tensor.hpp"

// Differentiable tensor operations. Each op computes its forward value
// eagerly and, when a tape is active and an input requires gradients,
// records the rule that routes the output gradient back to its inputs.

namespace flowda {

namespace detail {

using StoragePtr = std::shared_ptr<TensorStorage>;

inline GradientTape* recording_tape(std::initializer_list<const Tensor*> inputs) {
  auto* tape = GradientTape::active();
  if (!tape) return nullptr;
  for (const auto* t : inputs) {
    if (t->defined() && t->requires_grad()) return tape;
  }
  return nullptr;
}

inline GradientTape* recording_tape(std::span<const Tensor> inputs) {
  auto* tape = GradientTape::active();
  if (!tape) return nullptr;
  for (const auto& t : inputs) {
    if (t.requires_grad()) return tape;
  }
  return nullptr;
}

inline Tensor finish(Tensor out, GradientTape* tape, GradientTape::Propagate propagate) {
  if (tape) {
    out.set_requires_grad(true);
    tape->record(out, std::move(propagate));
  }
  return out;
}

inline bool wants_grad(const StoragePtr& s) { return s && s->requires_grad; }

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
};

inline AxisSplit split_at(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

enum class BinaryKind { kAdd, kSub, kMul };

inline Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* name) {
  const bool same = a.shape() == b.shape();
  const bool a_scalar = a.numel() == 1;
  const bool b_scalar = b.numel() == 1;
  if (!same && !a_scalar && !b_scalar) {
    throw DimensionError(std::string(name) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ and neither is a scalar");
  }
  const Shape out_shape = (same || b_scalar) ? a.shape() : b.shape();
  const std::size_t n = shape_numel(out_shape);
  auto ad = a.data();
  auto bd = b.data();
  const std::size_t a_step = (a.numel() == n) ? 1 : 0;
  const std::size_t b_step = (b.numel() == n) ? 1 : 0;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ad[i * a_step];
    const double y = bd[i * b_step];
    switch (kind) {
      case BinaryKind::kAdd: out[i] = x + y; break;
      case BinaryKind::kSub: out[i] = x - y; break;
      case BinaryKind::kMul: out[i] = x * y; break;
    }
  }
  auto* tape = recording_tape({&a, &b});
  return finish(Tensor(out_shape, std::move(out)), tape,
                [sa = a.storage_ptr(), sb = b.storage_ptr(), kind, n, a_step, b_step](std::span<const double> g) {
                  if (wants_grad(sa)) {
                    auto& ga = sa->ensure_grad();
                    for (std::size_t i = 0; i < n; ++i) {
                      const double d = kind == BinaryKind::kMul ? g[i] * sb->data[i * b_step] : g[i];
                      ga[i * a_step] += d;
                    }
                  }
                  if (wants_grad(sb)) {
                    auto& gb = sb->ensure_grad();
                    for (std::size_t i = 0; i < n; ++i) {
                      double d = g[i];
                      if (kind == BinaryKind::kSub) d = -d;
                      if (kind == BinaryKind::kMul) d = g[i] * sa->data[i * a_step];
                      gb[i * b_step] += d;
                    }
                  }
                });
}

// Elementwise map whose derivative is expressed through input x and output y.
template <class Forward, class Derivative>
Tensor unary(const Tensor& x, Forward forward, Derivative derivative) {
  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = forward(xd[i]);
  Tensor result(x.shape(), std::move(out));
  auto* tape = recording_tape({&x});
  if (!tape) return result;
  return finish(result, tape, [sx = x.storage_ptr(), sy = std::weak_ptr(result.storage_ptr()), derivative](std::span<const double> g) {
    if (!wants_grad(sx)) return;
    auto y = sy.lock();
    auto& gx = sx->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * derivative(sx->data[i], y->data[i]);
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor add(const Tensor& a, const Tensor& b) { return detail::binary(a, b, detail::BinaryKind::kAdd, "add"); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return detail::binary(a, b, detail::BinaryKind::kSub, "sub"); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return detail::binary(a, b, detail::BinaryKind::kMul, "mul"); }

inline Tensor scale(const Tensor& x, double factor) {
  return detail::unary(
      x, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return detail::stable_sigmoid(v); }, [](double, double y) { return y * (1.0 - y); });
}

inline Tensor exp(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Linear algebra

/// a[m x k] * b[k x n].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ad[i * k + p];
      const double* brow = &bd[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += s * brow[j];
    }
  }
  auto* tape = detail::recording_tape({&a, &b});
  return detail::finish(Tensor({m, n}, std::move(out)), tape,
                        [sa = a.storage_ptr(), sb = b.storage_ptr(), m, k, n](std::span<const double> g) {
                          if (detail::wants_grad(sa)) {
                            auto& ga = sa->ensure_grad();
                            for (std::size_t i = 0; i < m; ++i) {
                              for (std::size_t p = 0; p < k; ++p) {
                                double acc = 0.0;
                                for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * sb->data[p * n + j];
                                ga[i * k + p] += acc;
                              }
                            }
                          }
                          if (detail::wants_grad(sb)) {
                            auto& gb = sb->ensure_grad();
                            for (std::size_t i = 0; i < m; ++i) {
                              for (std::size_t p = 0; p < k; ++p) {
                                const double s = sa->data[i * k + p];
                                for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += s * g[i * n + j];
                              }
                            }
                          }
                        });
}

/**
 * Affine map applied to every row: x[r x in] * W^T + bias, W is [out x in].
 * `bias` may be an undefined tensor.
 */
inline Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor()) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1)) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " incompatible with weight " +
                         shape_string(weight.shape()));
  }
  const std::size_t rows = x.dim(0), in = x.dim(1), out_w = weight.dim(0);
  if (bias.defined() && bias.numel() != out_w) {
    throw DimensionError("linear: bias " + shape_string(bias.shape()) + " does not match weight " +
                         shape_string(weight.shape()));
  }
  auto xd = x.data();
  auto wd = weight.data();
  std::vector<double> out(rows * out_w);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = &xd[r * in];
    for (std::size_t o = 0; o < out_w; ++o) {
      const double* wr = &wd[o * in];
      double acc = bias.defined() ? bias[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
      out[r * out_w + o] = acc;
    }
  }
  auto* tape = detail::recording_tape({&x, &weight, &bias});
  return detail::finish(
      Tensor({rows, out_w}, std::move(out)), tape,
      [sx = x.storage_ptr(), sw = weight.storage_ptr(), sb = bias.storage_ptr(), rows, in,
       out_w](std::span<const double> g) {
        if (detail::wants_grad(sx)) {
          auto& gx = sx->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            double* gxr = &gx[r * in];
            for (std::size_t o = 0; o < out_w; ++o) {
              const double s = g[r * out_w + o];
              const double* wr = &sw->data[o * in];
              for (std::size_t i = 0; i < in; ++i) gxr[i] += s * wr[i];
            }
          }
        }
        if (detail::wants_grad(sw)) {
          auto& gw = sw->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            const double* xr = &sx->data[r * in];
            for (std::size_t o = 0; o < out_w; ++o) {
              const double s = g[r * out_w + o];
              double* gwr = &gw[o * in];
              for (std::size_t i = 0; i < in; ++i) gwr[i] += s * xr[i];
            }
          }
        }
        if (detail::wants_grad(sb)) {
          auto& gb = sb->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t o = 0; o < out_w; ++o) gb[o] += g[r * out_w + o];
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions and normalization

inline Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  auto* tape = detail::recording_tape({&x});
  return detail::finish(Tensor::scalar(total), tape, [sx = x.storage_ptr()](std::span<const double> g) {
    if (!detail::wants_grad(sx)) return;
    auto& gx = sx->ensure_grad();
    for (auto& v : gx) v += g[0];
  });
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

/// Softmax along `axis`, max-subtracted.
inline Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto split = detail::split_at(x.shape(), axis);
  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < split.outer; ++o) {
    for (std::size_t i = 0; i < split.inner; ++i) {
      const std::size_t base = o * split.length * split.inner + i;
      double peak = xd[base];
      for (std::size_t a = 1; a < split.length; ++a) peak = std::max(peak, xd[base + a * split.inner]);
      double total = 0.0;
      for (std::size_t a = 0; a < split.length; ++a) {
        const double e = std::exp(xd[base + a * split.inner] - peak);
        out[base + a * split.inner] = e;
        total += e;
      }
      for (std::size_t a = 0; a < split.length; ++a) out[base + a * split.inner] /= total;
    }
  }
  Tensor result(x.shape(), std::move(out));
  auto* tape = detail::recording_tape({&x});
  if (!tape) return result;
  return detail::finish(result, tape,
                        [sx = x.storage_ptr(), sy = std::weak_ptr(result.storage_ptr()), split](std::span<const double> g) {
                          if (!detail::wants_grad(sx)) return;
                          auto y = sy.lock();
                          auto& gx = sx->ensure_grad();
                          for (std::size_t o = 0; o < split.outer; ++o) {
                            for (std::size_t i = 0; i < split.inner; ++i) {
                              const std::size_t base = o * split.length * split.inner + i;
                              double dot = 0.0;
                              for (std::size_t a = 0; a < split.length; ++a) {
                                const auto k = base + a * split.inner;
                                dot += g[k] * y->data[k];
                              }
                              for (std::size_t a = 0; a < split.length; ++a) {
                                const auto k = base + a * split.inner;
                                gx[k] += y->data[k] * (g[k] - dot);
                              }
                            }
                          }
                        });
}

// ---------------------------------------------------------------------------
// Shape manipulation (always copies)

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  std::vector<double> values(x.data().begin(), x.data().end());
  auto* tape = detail::recording_tape({&x});
  return detail::finish(Tensor(std::move(shape), std::move(values)), tape,
                        [sx = x.storage_ptr()](std::span<const double> g) {
                          if (!detail::wants_grad(sx)) return;
                          auto& gx = sx->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                        });
}

inline Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no tensors given");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range for " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) {
      throw DimensionError("concat: " + shape_string(s) + " incompatible with " + shape_string(first) +
                           " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  const auto split = detail::split_at(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.shape()[axis];
    auto pd = p.data();
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(&pd[o * len * split.inner], len * split.inner,
                  &out[(o * split.length + offset) * split.inner]);
    }
    offsets.push_back(offset);
    offset += len;
  }
  auto* tape = detail::recording_tape(parts);
  std::vector<detail::StoragePtr> sources;
  if (tape) {
    for (const auto& p : parts) sources.push_back(p.storage_ptr());
  }
  return detail::finish(Tensor(out_shape, std::move(out)), tape,
                        [sources, offsets, split, axis](std::span<const double> g) {
                          for (std::size_t k = 0; k < sources.size(); ++k) {
                            if (!detail::wants_grad(sources[k])) continue;
                            const std::size_t len = sources[k]->shape[axis];
                            auto& gs = sources[k]->ensure_grad();
                            for (std::size_t o = 0; o < split.outer; ++o) {
                              const double* src = &g[(o * split.length + offsets[k]) * split.inner];
                              double* dst = &gs[o * len * split.inner];
                              for (std::size_t i = 0; i < len * split.inner; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

inline Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

/// Stacks equally shaped tensors along a new axis.
inline Tensor stack(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("stack: no tensors given");
  const Shape& base = parts[0].shape();
  if (axis > base.size()) throw DimensionError("stack: axis out of range for " + shape_string(base));
  std::vector<Tensor> expanded;
  expanded.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.shape() != base) {
      throw DimensionError("stack: " + shape_string(p.shape()) + " differs from " + shape_string(base));
    }
    Shape s = base;
    s.insert(s.begin() + static_cast<std::ptrdiff_t>(axis), 1);
    expanded.push_back(reshape(p, s));
  }
  return concat(expanded, axis);
}

/// Slice [start, start + length) along `axis`.
inline Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const auto split = detail::split_at(x.shape(), axis);
  if (length == 0 || start + length > split.length) {
    throw DimensionError("narrow: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") out of bounds for " + shape_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  auto xd = x.data();
  std::vector<double> out(shape_numel(out_shape));
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(&xd[(o * split.length + start) * split.inner], length * split.inner,
                &out[o * length * split.inner]);
  }
  auto* tape = detail::recording_tape({&x});
  return detail::finish(Tensor(out_shape, std::move(out)), tape,
                        [sx = x.storage_ptr(), split, start, length](std::span<const double> g) {
                          if (!detail::wants_grad(sx)) return;
                          auto& gx = sx->ensure_grad();
                          for (std::size_t o = 0; o < split.outer; ++o) {
                            const double* src = &g[o * length * split.inner];
                            double* dst = &gx[(o * split.length + start) * split.inner];
                            for (std::size_t i = 0; i < length * split.inner; ++i) dst[i] += src[i];
                          }
                        });
}

/// narrow() of width one with the axis removed.
inline Tensor select(const Tensor& x, std::size_t axis, std::size_t index) {
  Shape s = x.shape();
  auto part = narrow(x, axis, index, 1);
  s.erase(s.begin() + static_cast<std::ptrdiff_t>(axis));
  if (s.empty()) s = {1};
  return reshape(part, s);
}

// ---------------------------------------------------------------------------
// Fused helpers used by attention and the losses

/// x + y broadcast along `axis`, where y has x's shape with `axis` removed.
inline Tensor add_broadcast(const Tensor& x, const Tensor& y, std::size_t axis) {
  const auto split = detail::split_at(x.shape(), axis);
  Shape expected = x.shape();
  expected.erase(expected.begin() + static_cast<std::ptrdiff_t>(axis));
  if (expected.empty()) expected = {1};
  if (y.shape() != expected) {
    throw DimensionError("add_broadcast: " + shape_string(y.shape()) + " cannot broadcast into " +
                         shape_string(x.shape()) + " along axis " + std::to_string(axis));
  }
  auto xd = x.data();
  auto yd = y.data();
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < split.outer; ++o) {
    for (std::size_t a = 0; a < split.length; ++a) {
      for (std::size_t i = 0; i < split.inner; ++i) {
        const auto k = (o * split.length + a) * split.inner + i;
        out[k] = xd[k] + yd[o * split.inner + i];
      }
    }
  }
  auto* tape = detail::recording_tape({&x, &y});
  return detail::finish(Tensor(x.shape(), std::move(out)), tape,
                        [sx = x.storage_ptr(), sy = y.storage_ptr(), split](std::span<const double> g) {
                          if (detail::wants_grad(sx)) {
                            auto& gx = sx->ensure_grad();
                            for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k];
                          }
                          if (detail::wants_grad(sy)) {
                            auto& gy = sy->ensure_grad();
                            for (std::size_t o = 0; o < split.outer; ++o) {
                              for (std::size_t a = 0; a < split.length; ++a) {
                                for (std::size_t i = 0; i < split.inner; ++i) {
                                  gy[o * split.inner + i] += g[(o * split.length + a) * split.inner + i];
                                }
                              }
                            }
                          }
                        });
}

/// out[b] = sum_n weights[b, n] * values[b, n, :]; weights [B x N], values [B x N x H].
inline Tensor batched_weighted_sum(const Tensor& weights, const Tensor& values) {
  if (weights.rank() != 2 || values.rank() != 3 || weights.dim(0) != values.dim(0) ||
      weights.dim(1) != values.dim(1)) {
    throw DimensionError("batched_weighted_sum: weights " + shape_string(weights.shape()) + " incompatible with values " +
                         shape_string(values.shape()));
  }
  const std::size_t batch = values.dim(0), steps = values.dim(1), width = values.dim(2);
  auto wd = weights.data();
  auto vd = values.data();
  std::vector<double> out(batch * width, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t n = 0; n < steps; ++n) {
      const double w = wd[b * steps + n];
      const double* v = &vd[(b * steps + n) * width];
      for (std::size_t h = 0; h < width; ++h) out[b * width + h] += w * v[h];
    }
  }
  auto* tape = detail::recording_tape({&weights, &values});
  return detail::finish(Tensor({batch, width}, std::move(out)), tape,
                        [sw = weights.storage_ptr(), sv = values.storage_ptr(), batch, steps,
                         width](std::span<const double> g) {
                          if (detail::wants_grad(sw)) {
                            auto& gw = sw->ensure_grad();
                            for (std::size_t b = 0; b < batch; ++b) {
                              for (std::size_t n = 0; n < steps; ++n) {
                                double acc = 0.0;
                                const double* v = &sv->data[(b * steps + n) * width];
                                for (std::size_t h = 0; h < width; ++h) acc += g[b * width + h] * v[h];
                                gw[b * steps + n] += acc;
                              }
                            }
                          }
                          if (detail::wants_grad(sv)) {
                            auto& gv = sv->ensure_grad();
                            for (std::size_t b = 0; b < batch; ++b) {
                              for (std::size_t n = 0; n < steps; ++n) {
                                const double w = sw->data[b * steps + n];
                                double* dst = &gv[(b * steps + n) * width];
                                for (std::size_t h = 0; h < width; ++h) dst[h] += w * g[b * width + h];
                              }
                            }
                          }
                        });
}

/// out[b, n] = values[b, n, :] . query[b, :]; values [B x N x H], query [B x H].
inline Tensor batched_dot(const Tensor& values, const Tensor& query) {
  if (values.rank() != 3 || query.rank() != 2 || values.dim(0) != query.dim(0) || values.dim(2) != query.dim(1)) {
    throw DimensionError("batched_dot: values " + shape_string(values.shape()) + " incompatible with query " +
                         shape_string(query.shape()));
  }
  const std::size_t batch = values.dim(0), steps = values.dim(1), width = values.dim(2);
  auto vd = values.data();
  auto qd = query.data();
  std::vector<double> out(batch * steps, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t n = 0; n < steps; ++n) {
      double acc = 0.0;
      for (std::size_t h = 0; h < width; ++h) acc += vd[(b * steps + n) * width + h] * qd[b * width + h];
      out[b * steps + n] = acc;
    }
  }
  auto* tape = detail::recording_tape({&values, &query});
  return detail::finish(Tensor({batch, steps}, std::move(out)), tape,
                        [sv = values.storage_ptr(), sq = query.storage_ptr(), batch, steps,
                         width](std::span<const double> g) {
                          for (std::size_t b = 0; b < batch; ++b) {
                            for (std::size_t n = 0; n < steps; ++n) {
                              const double s = g[b * steps + n];
                              const std::size_t base = (b * steps + n) * width;
                              if (detail::wants_grad(sv)) {
                                auto& gv = sv->ensure_grad();
                                for (std::size_t h = 0; h < width; ++h) gv[base + h] += s * sq->data[b * width + h];
                              }
                              if (detail::wants_grad(sq)) {
                                auto& gq = sq->ensure_grad();
                                for (std::size_t h = 0; h < width; ++h) gq[b * width + h] += s * sv->data[base + h];
                              }
                            }
                          }
                        });
}

/**
 * Mean binary cross-entropy evaluated from logits:
 *   softplus(z) - y * z  ==  -[y log sigmoid(z) + (1 - y) log(1 - sigmoid(z))].
 * Labels are constants.
 */
inline Tensor bce_with_logits(const Tensor& logits, const Tensor& labels) {
  if (logits.numel() != labels.numel()) {
    throw DimensionError("bce_with_logits: logits " + shape_string(logits.shape()) + " vs labels " +
                         shape_string(labels.shape()));
  }
  const std::size_t n = logits.numel();
  auto z = logits.data();
  auto y = labels.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += detail::softplus(z[i]) - y[i] * z[i];
  auto* tape = detail::recording_tape({&logits});
  return detail::finish(Tensor::scalar(total / static_cast<double>(n)), tape,
                        [sz = logits.storage_ptr(), sy = labels.storage_ptr(), n](std::span<const double> g) {
                          if (!detail::wants_grad(sz)) return;
                          auto& gz = sz->ensure_grad();
                          const double s = g[0] / static_cast<double>(n);
                          for (std::size_t i = 0; i < n; ++i) {
                            gz[i] += s * (detail::stable_sigmoid(sz->data[i]) - sy->data[i]);
                          }
                        });
}

}  // namespace flowda
