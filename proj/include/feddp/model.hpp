/*
 * Copyright 2026 The FedDP Simulator Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Small per-sample-differentiable models over a flat parameter vector.
//
// Three kinds are supported:
//   linear-regression    out = W x + b, loss = 0.5 (out - y)^2, output_dim 1
//   logistic-regression  z = w . x + b, binary cross-entropy, output_dim 2
//   mlp                  o = W2 act(W1 x + b1) + b2, softmax cross-entropy
//
// Weights are stored row-major with shape [fan_out x fan_in]. All arithmetic
// is double precision.

#ifndef FEDDP_MODEL_HPP_
#define FEDDP_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feddp/errors.hpp"
#include "feddp/rng.hpp"

namespace feddp {

enum class ModelKind { kLinearRegression, kLogisticRegression, kMlp };
enum class Activation { kRelu, kTanh };

inline std::string_view ToString(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLinearRegression: return "linear-regression";
    case ModelKind::kLogisticRegression: return "logistic-regression";
    case ModelKind::kMlp: return "mlp";
  }
  return "?";
}

inline std::string_view ToString(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

struct ModelSpec {
  ModelKind kind = ModelKind::kMlp;
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 0;
  std::size_t output_dim = 1;
  Activation activation = Activation::kTanh;

  bool is_classifier() const { return kind != ModelKind::kLinearRegression; }
  std::size_t num_classes() const { return output_dim; }

  static ModelSpec Linear(std::size_t in) {
    return {ModelKind::kLinearRegression, in, 0, 1, Activation::kTanh};
  }
  static ModelSpec Logistic(std::size_t in) {
    return {ModelKind::kLogisticRegression, in, 0, 2, Activation::kTanh};
  }
  static ModelSpec Mlp(std::size_t in, std::size_t hidden, std::size_t out,
                       Activation act) {
    return {ModelKind::kMlp, in, hidden, out, act};
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct LayerSlice {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  bool is_bias = false;

  friend bool operator==(const LayerSlice&, const LayerSlice&) = default;
};

using Layout = std::vector<LayerSlice>;

inline void ValidateSpec(const ModelSpec& spec) {
  if (spec.input_dim == 0) throw StructuralError("model input_dim must be > 0");
  if (spec.output_dim == 0) {
    throw StructuralError("model output_dim must be > 0");
  }
  switch (spec.kind) {
    case ModelKind::kLinearRegression:
      if (spec.output_dim != 1) {
        throw StructuralError("linear-regression requires output_dim 1");
      }
      break;
    case ModelKind::kLogisticRegression:
      if (spec.output_dim != 2) {
        throw StructuralError(
            "logistic-regression is binary and requires output_dim 2");
      }
      break;
    case ModelKind::kMlp:
      if (spec.hidden_dim == 0) {
        throw StructuralError("mlp requires hidden_dim > 0");
      }
      if (spec.output_dim < 2) {
        throw StructuralError("mlp classifier requires output_dim >= 2");
      }
      break;
  }
}

// Ordered layer layout. For MLP: hidden.weight, hidden.bias, head.weight,
// head.bias. The single-layer kinds expose only the head layers.
inline Layout MakeLayout(const ModelSpec& spec) {
  ValidateSpec(spec);
  Layout layout;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t fan_in, std::size_t fan_out,
                 bool bias) {
    const std::size_t len = bias ? fan_out : fan_in * fan_out;
    layout.push_back({std::move(name), offset, len, fan_in, fan_out, bias});
    offset += len;
  };
  switch (spec.kind) {
    case ModelKind::kLinearRegression:
      add("head.weight", spec.input_dim, 1, false);
      add("head.bias", spec.input_dim, 1, true);
      break;
    case ModelKind::kLogisticRegression:
      add("head.weight", spec.input_dim, 1, false);
      add("head.bias", spec.input_dim, 1, true);
      break;
    case ModelKind::kMlp:
      add("hidden.weight", spec.input_dim, spec.hidden_dim, false);
      add("hidden.bias", spec.input_dim, spec.hidden_dim, true);
      add("head.weight", spec.hidden_dim, spec.output_dim, false);
      add("head.bias", spec.hidden_dim, spec.output_dim, true);
      break;
  }
  return layout;
}

inline std::size_t ParameterCount(const ModelSpec& spec) {
  const Layout layout = MakeLayout(spec);
  return layout.back().offset + layout.back().length;
}

inline std::vector<std::string> LayerNames(const Layout& layout) {
  std::vector<std::string> names;
  names.reserve(layout.size());
  for (const auto& l : layout) names.push_back(l.name);
  return names;
}

struct ParameterVector {
  std::vector<double> values;
  Layout layout;

  std::size_t size() const { return values.size(); }

  const LayerSlice& slice(std::string_view name) const {
    for (const auto& l : layout) {
      if (l.name == name) return l;
    }
    throw StructuralError("no layer named '" + std::string(name) + "'");
  }
  std::span<const double> layer(std::string_view name) const {
    const auto& s = slice(name);
    return std::span<const double>(values).subspan(s.offset, s.length);
  }
  std::span<double> layer(std::string_view name) {
    const auto& s = slice(name);
    return std::span<double>(values).subspan(s.offset, s.length);
  }

  friend bool operator==(const ParameterVector&,
                         const ParameterVector&) = default;
};

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<double> row(std::size_t r) {
    return std::span<double>(data).subspan(r * cols, cols);
  }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data).subspan(r * cols, cols);
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Inputs [batch x input_dim]; targets hold class indices (as doubles) for
// classifiers and real targets for regression.
struct SampleBatch {
  Matrix inputs;
  std::vector<double> targets;

  std::size_t size() const { return targets.size(); }

  SampleBatch Select(std::span<const std::size_t> indices) const {
    SampleBatch out;
    out.inputs = Matrix(indices.size(), inputs.cols);
    out.targets.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto src = inputs.row(indices[i]);
      std::copy(src.begin(), src.end(), out.inputs.row(i).begin());
      out.targets.push_back(targets[indices[i]]);
    }
    return out;
  }

  friend bool operator==(const SampleBatch&, const SampleBatch&) = default;
};

inline void CheckParameters(const ModelSpec& spec, const ParameterVector& p) {
  const Layout expected = MakeLayout(spec);
  std::size_t total = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& e = expected[i];
    if (i >= p.layout.size() || p.layout[i].name != e.name ||
        p.layout[i].offset != e.offset || p.layout[i].length != e.length) {
      throw StructuralError("parameter layout mismatch at layer '" + e.name +
                            "' (expected length " + std::to_string(e.length) +
                            ")");
    }
    total += e.length;
  }
  if (p.layout.size() != expected.size()) {
    throw StructuralError("parameter layout has unexpected extra layer '" +
                          p.layout[expected.size()].name + "'");
  }
  if (p.values.size() != total) {
    throw StructuralError("parameter vector length " +
                          std::to_string(p.values.size()) +
                          " does not match layout total " +
                          std::to_string(total));
  }
  for (const auto& l : p.layout) {
    for (std::size_t k = 0; k < l.length; ++k) {
      if (!std::isfinite(p.values[l.offset + k])) {
        throw NumericError("non-finite parameter in layer '" + l.name +
                           "' at offset " + std::to_string(k));
      }
    }
  }
}

inline void CheckBatch(const ModelSpec& spec, const SampleBatch& batch) {
  const std::string first_layer =
      spec.kind == ModelKind::kMlp ? "hidden.weight" : "head.weight";
  if (batch.size() == 0) throw StructuralError("empty sample batch");
  if (batch.inputs.rows != batch.size()) {
    throw StructuralError("batch has " + std::to_string(batch.inputs.rows) +
                          " input rows but " +
                          std::to_string(batch.size()) + " targets");
  }
  if (batch.inputs.cols != spec.input_dim) {
    throw StructuralError("input width " + std::to_string(batch.inputs.cols) +
                          " does not match layer '" + first_layer +
                          "' fan-in " + std::to_string(spec.input_dim));
  }
  if (spec.is_classifier()) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double y = batch.targets[i];
      if (!(y >= 0.0) || y != std::floor(y) ||
          y >= static_cast<double>(spec.num_classes())) {
        throw StructuralError("target of sample " + std::to_string(i) +
                              " is not a class index below " +
                              std::to_string(spec.num_classes()));
      }
    }
  }
}

namespace detail {

inline double Softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double Activate(Activation a, double x) {
  return a == Activation::kRelu ? std::max(x, 0.0) : std::tanh(x);
}

inline double ActivateDerivative(Activation a, double pre, double post) {
  if (a == Activation::kRelu) return pre > 0.0 ? 1.0 : 0.0;
  return 1.0 - post * post;
}

// Loss of one example; writes its scores and, when `grad` is non-empty, the
// gradient of the loss with respect to every parameter.
inline double EvalSample(const ModelSpec& spec, const ParameterVector& p,
                         std::span<const double> x, double y,
                         std::span<double> scores, std::span<double> grad) {
  const auto& v = p.values;
  const bool want_grad = !grad.empty();
  switch (spec.kind) {
    case ModelKind::kLinearRegression: {
      const std::size_t d = spec.input_dim;
      double out = v[d];
      for (std::size_t j = 0; j < d; ++j) out += v[j] * x[j];
      scores[0] = out;
      const double r = out - y;
      if (want_grad) {
        for (std::size_t j = 0; j < d; ++j) grad[j] = r * x[j];
        grad[d] = r;
      }
      return 0.5 * r * r;
    }
    case ModelKind::kLogisticRegression: {
      const std::size_t d = spec.input_dim;
      double z = v[d];
      for (std::size_t j = 0; j < d; ++j) z += v[j] * x[j];
      scores[0] = 0.0;
      scores[1] = z;
      if (want_grad) {
        const double r = Sigmoid(z) - y;
        for (std::size_t j = 0; j < d; ++j) grad[j] = r * x[j];
        grad[d] = r;
      }
      return Softplus(z) - y * z;
    }
    case ModelKind::kMlp: {
      const std::size_t in = spec.input_dim;
      const std::size_t hid = spec.hidden_dim;
      const std::size_t out = spec.output_dim;
      const std::size_t w1 = 0;
      const std::size_t b1 = w1 + in * hid;
      const std::size_t w2 = b1 + hid;
      const std::size_t b2 = w2 + hid * out;
      // Per-thread scratch keeps the hot loop free of allocations.
      thread_local std::vector<double> pre, h, dh;
      pre.resize(hid);
      h.resize(hid);
      for (std::size_t u = 0; u < hid; ++u) {
        double a = v[b1 + u];
        for (std::size_t j = 0; j < in; ++j) a += v[w1 + u * in + j] * x[j];
        pre[u] = a;
        h[u] = Activate(spec.activation, a);
      }
      double max_score = -INFINITY;
      for (std::size_t c = 0; c < out; ++c) {
        double o = v[b2 + c];
        for (std::size_t u = 0; u < hid; ++u) o += v[w2 + c * hid + u] * h[u];
        scores[c] = o;
        max_score = std::max(max_score, o);
      }
      double sum_exp = 0.0;
      for (std::size_t c = 0; c < out; ++c) {
        sum_exp += std::exp(scores[c] - max_score);
      }
      const double log_z = max_score + std::log(sum_exp);
      const auto label = static_cast<std::size_t>(y);
      const double loss = log_z - scores[label];
      if (want_grad) {
        dh.assign(hid, 0.0);
        for (std::size_t c = 0; c < out; ++c) {
          const double d_out =
              std::exp(scores[c] - log_z) - (c == label ? 1.0 : 0.0);
          grad[b2 + c] = d_out;
          for (std::size_t u = 0; u < hid; ++u) {
            grad[w2 + c * hid + u] = d_out * h[u];
            dh[u] += v[w2 + c * hid + u] * d_out;
          }
        }
        for (std::size_t u = 0; u < hid; ++u) {
          const double da =
              dh[u] * ActivateDerivative(spec.activation, pre[u], h[u]);
          grad[b1 + u] = da;
          for (std::size_t j = 0; j < in; ++j) grad[w1 + u * in + j] = da * x[j];
        }
      }
      // log-sum-exp can round a hair below the chosen score; losses are >= 0.
      return std::max(loss, 0.0);
    }
  }
  return 0.0;
}

}  // namespace detail

struct ForwardResult {
  std::vector<double> losses;
  Matrix predictions;  // [batch x output_dim] class scores or real outputs
};

inline ForwardResult Forward(const ModelSpec& spec, const ParameterVector& p,
                             const SampleBatch& batch) {
  CheckParameters(spec, p);
  CheckBatch(spec, batch);
  ForwardResult r;
  r.losses.resize(batch.size());
  r.predictions = Matrix(batch.size(), spec.output_dim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    r.losses[i] = detail::EvalSample(spec, p, batch.inputs.row(i),
                                     batch.targets[i], r.predictions.row(i), {});
    if (!std::isfinite(r.losses[i])) {
      throw NumericError("non-finite loss at sample " + std::to_string(i));
    }
  }
  return r;
}

// Row i is the gradient of loss_i with respect to every parameter.
inline Matrix PerSampleGradients(const ModelSpec& spec,
                                 const ParameterVector& p,
                                 const SampleBatch& batch) {
  CheckParameters(spec, p);
  CheckBatch(spec, batch);
  Matrix g(batch.size(), p.size());
  std::vector<double> scores(spec.output_dim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    detail::EvalSample(spec, p, batch.inputs.row(i), batch.targets[i], scores,
                       g.row(i));
  }
  return g;
}

inline double MeanLoss(const ModelSpec& spec, const ParameterVector& p,
                       const SampleBatch& batch) {
  const auto r = Forward(spec, p, batch);
  double s = 0.0;
  for (double l : r.losses) s += l;
  return s / static_cast<double>(r.losses.size());
}

inline std::vector<double> MeanLossGradient(const ModelSpec& spec,
                                            const ParameterVector& p,
                                            const SampleBatch& batch) {
  const Matrix g = PerSampleGradients(spec, p, batch);
  std::vector<double> mean(g.cols, 0.0);
  for (std::size_t i = 0; i < g.rows; ++i) {
    for (std::size_t j = 0; j < g.cols; ++j) mean[j] += g(i, j);
  }
  for (double& m : mean) m /= static_cast<double>(g.rows);
  return mean;
}

// Index of the largest score; ties resolve to the lowest index.
inline std::size_t ArgMax(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return best;
}

// Weights uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)); biases zero.
inline ParameterVector InitializeParameters(const ModelSpec& spec,
                                            std::uint64_t seed) {
  ParameterVector p;
  p.layout = MakeLayout(spec);
  p.values.assign(p.layout.back().offset + p.layout.back().length, 0.0);
  CounterRng rng(StreamKey({seed, 0x1417}));
  for (const auto& l : p.layout) {
    if (l.is_bias) continue;
    const double a =
        std::sqrt(6.0 / static_cast<double>(l.fan_in + l.fan_out));
    for (std::size_t k = 0; k < l.length; ++k) {
      p.values[l.offset + k] = a * (2.0 * rng.NextUniform() - 1.0);
    }
  }
  return p;
}

// Non-private full-batch gradient descent from the seeded initialization.
inline ParameterVector Pretrain(const ModelSpec& spec, const SampleBatch& data,
                                std::size_t epochs, double lr,
                                std::uint64_t seed) {
  if (!(lr > 0.0)) throw DomainError("pretrain learning rate must be > 0");
  ParameterVector p = InitializeParameters(spec, seed);
  if (epochs == 0) return p;
  CheckBatch(spec, data);
  std::vector<double> scores(spec.output_dim);
  std::vector<double> row(p.size());
  std::vector<double> mean(p.size());
  const auto n = static_cast<double>(data.size());
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    std::fill(mean.begin(), mean.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      loss += detail::EvalSample(spec, p, data.inputs.row(i), data.targets[i],
                                 scores, row);
      for (std::size_t j = 0; j < row.size(); ++j) mean[j] += row[j];
    }
    bool finite = std::isfinite(loss);
    for (std::size_t j = 0; j < p.size(); ++j) {
      p.values[j] -= lr * (mean[j] / n);
      finite = finite && std::isfinite(p.values[j]);
    }
    if (!finite) {
      throw NumericError("pretraining diverged at epoch " +
                         std::to_string(epoch));
    }
  }
  return p;
}

}  // namespace feddp

#endif  // FEDDP_MODEL_HPP_
