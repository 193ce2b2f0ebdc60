/*
 * Copyright 2026 The dpda Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dpda/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpda/error.hpp"
#include "dpda/parallel.hpp"
#include "dpda/simd.hpp"

namespace dpda {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kIdentity:
      return "identity";
    case Activation::kSigmoid:
      return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

MlpParams::MlpParams(std::span<const std::size_t> dims,
                     std::span<const Activation> activations) {
  if (dims.size() < 2 || activations.size() != dims.size() - 1) {
    throw ShapeError("MLP needs dims.size() == activations.size() + 1 >= 2");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] == 0 || dims[l + 1] == 0) throw ShapeError("zero layer width");
    LayerShape s;
    s.in = dims[l];
    s.out = dims[l + 1];
    s.activation = activations[l];
    s.weight_offset = offset;
    s.bias_offset = offset + s.in * s.out;
    offset = s.end();
    layers_.push_back(s);
  }
  values_.assign(offset, 0.0);
}

MlpParams MlpParams::initialized(std::span<const std::size_t> dims,
                                 std::span<const Activation> activations,
                                 Rng& rng) {
  MlpParams mlp(dims, activations);
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    const auto& s = mlp.layer(l);
    const double gain = s.activation == Activation::kRelu ? 2.0 : 1.0;
    const double sd = std::sqrt(gain / static_cast<double>(s.in));
    for (double& w : mlp.weight(l)) w = sd * standard_normal(rng);
  }
  return mlp;
}

ParamRange MlpParams::layer_range(std::size_t l) const {
  const auto& s = layers_.at(l);
  return {s.weight_offset, s.end()};
}

std::span<double> MlpParams::weight(std::size_t l) {
  const auto& s = layers_.at(l);
  return {values_.data() + s.weight_offset, s.in * s.out};
}
std::span<const double> MlpParams::weight(std::size_t l) const {
  const auto& s = layers_.at(l);
  return {values_.data() + s.weight_offset, s.in * s.out};
}
std::span<double> MlpParams::bias(std::size_t l) {
  const auto& s = layers_.at(l);
  return {values_.data() + s.bias_offset, s.out};
}
std::span<const double> MlpParams::bias(std::size_t l) const {
  const auto& s = layers_.at(l);
  return {values_.data() + s.bias_offset, s.out};
}

MlpParams MlpParams::slice(std::size_t first, std::size_t last) const {
  if (first >= last || last > layers_.size()) {
    throw ShapeError("MLP slice out of range");
  }
  std::vector<std::size_t> dims{layers_[first].in};
  std::vector<Activation> acts;
  for (std::size_t l = first; l < last; ++l) {
    dims.push_back(layers_[l].out);
    acts.push_back(layers_[l].activation);
  }
  MlpParams out(dims, acts);
  const std::size_t begin = layers_[first].weight_offset;
  std::copy(values_.begin() + begin, values_.begin() + layers_[last - 1].end(),
            out.values_.begin());
  return out;
}

MlpParams MlpParams::concat(const MlpParams& a, const MlpParams& b) {
  if (a.output_dim() != b.input_dim()) {
    throw ShapeError("concat: " + std::to_string(a.output_dim()) +
                     " outputs feed " + std::to_string(b.input_dim()) +
                     " inputs");
  }
  std::vector<std::size_t> dims{a.input_dim()};
  std::vector<Activation> acts;
  for (const auto* m : {&a, &b}) {
    for (const auto& s : m->layers_) {
      dims.push_back(s.out);
      acts.push_back(s.activation);
    }
  }
  MlpParams out(dims, acts);
  std::copy(a.values_.begin(), a.values_.end(), out.values_.begin());
  std::copy(b.values_.begin(), b.values_.end(),
            out.values_.begin() + a.values_.size());
  return out;
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void apply_activation(Activation act, std::span<const double> pre,
                      std::span<double> post) {
  switch (act) {
    case Activation::kRelu:
      simd::kernels().relu(pre.data(), post.data(), pre.size());
      break;
    case Activation::kIdentity:
      std::copy(pre.begin(), pre.end(), post.begin());
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < pre.size(); ++i) post[i] = sigmoid(pre[i]);
      break;
  }
}

// In place: g (w.r.t. post) becomes the gradient w.r.t. pre.
void activation_backward(Activation act, std::span<const double> pre,
                         std::span<const double> post, std::span<double> g) {
  switch (act) {
    case Activation::kRelu:
      simd::kernels().relu_mask(pre.data(), g.data(), g.size());
      break;
    case Activation::kIdentity:
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = g[i] * (post[i] * (1.0 - post[i]));
      }
      break;
  }
}

void layer_forward_rows(const MlpParams& mlp, std::size_t l, const Matrix& in,
                        Matrix& pre, Matrix& post, std::size_t r0,
                        std::size_t r1) {
  const auto& s = mlp.layer(l);
  const auto w = mlp.weight(l);
  const auto b = mlp.bias(l);
  for (std::size_t i = r0; i < r1; ++i) {
    auto y = pre.row(i);
    std::copy(b.begin(), b.end(), y.begin());
    const auto x = in.row(i);
    for (std::size_t k = 0; k < s.in; ++k) {
      simd::axpy(x[k], w.subspan(k * s.out, s.out), y);
    }
    apply_activation(s.activation, y, post.row(i));
  }
}

// Gradients w.r.t. each layer's pre-activation, all rows.
std::vector<Matrix> layer_deltas(const MlpParams& mlp, const ForwardCache& cache,
                                 const Matrix& grad, GradientAt at,
                                 Matrix* input_grad) {
  const std::size_t layers = mlp.layer_count();
  if (cache.pre.size() != layers || cache.post.size() != layers + 1) {
    throw ShapeError("forward cache does not match network");
  }
  const std::size_t rows = cache.post[0].rows();
  require_shape(grad, rows, mlp.output_dim(), "backward gradient");

  std::vector<Matrix> delta(layers);
  delta[layers - 1] = grad;
  if (at == GradientAt::kOutput) {
    auto& d = delta[layers - 1];
    for (std::size_t i = 0; i < rows; ++i) {
      activation_backward(mlp.layer(layers - 1).activation,
                          cache.pre[layers - 1].row(i),
                          cache.post[layers].row(i), d.row(i));
    }
  }
  for (std::size_t l = layers; l-- > 0;) {
    if (l == 0 && input_grad == nullptr) break;
    const auto& s = mlp.layer(l);
    const auto w = mlp.weight(l);
    Matrix g(rows, s.in);
    parallel_for(rows, [&](std::size_t r0, std::size_t r1) {
      for (std::size_t i = r0; i < r1; ++i) {
        const auto d = delta[l].row(i);
        auto gi = g.row(i);
        for (std::size_t k = 0; k < s.in; ++k) {
          gi[k] = simd::dot(d, w.subspan(k * s.out, s.out));
        }
        if (l > 0) {
          activation_backward(mlp.layer(l - 1).activation,
                              cache.pre[l - 1].row(i), cache.post[l].row(i),
                              gi);
        }
      }
    });
    if (l == 0) {
      *input_grad = std::move(g);
    } else {
      delta[l - 1] = std::move(g);
    }
  }
  return delta;
}

}  // namespace

ForwardCache forward(const MlpParams& mlp, const Matrix& batch) {
  if (mlp.layer_count() == 0) throw ShapeError("empty network");
  if (batch.cols() != mlp.input_dim()) {
    throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                     " columns, network expects " +
                     std::to_string(mlp.input_dim()));
  }
  ForwardCache cache;
  cache.post.reserve(mlp.layer_count() + 1);
  cache.pre.reserve(mlp.layer_count());
  cache.post.push_back(batch);
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    Matrix pre(batch.rows(), mlp.layer(l).out);
    Matrix post(batch.rows(), mlp.layer(l).out);
    parallel_for(batch.rows(), [&](std::size_t r0, std::size_t r1) {
      layer_forward_rows(mlp, l, cache.post[l], pre, post, r0, r1);
    });
    cache.pre.push_back(std::move(pre));
    cache.post.push_back(std::move(post));
  }
  return cache;
}

Matrix predict(const MlpParams& mlp, const Matrix& batch) {
  return forward(mlp, batch).post.back();
}

BackwardResult backward(const MlpParams& mlp, const ForwardCache& cache,
                        const Matrix& grad, GradientAt at,
                        bool want_input_grad) {
  BackwardResult result;
  const auto delta = layer_deltas(mlp, cache, grad, at,
                                  want_input_grad ? &result.input_grad : nullptr);
  result.grad.assign(mlp.param_count(), 0.0);
  const std::size_t rows = grad.rows();
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    const auto& s = mlp.layer(l);
    std::span<double> gw(result.grad.data() + s.weight_offset, s.in * s.out);
    std::span<double> gb(result.grad.data() + s.bias_offset, s.out);
    for (std::size_t i = 0; i < rows; ++i) {
      const auto x = cache.post[l].row(i);
      const auto d = delta[l].row(i);
      for (std::size_t k = 0; k < s.in; ++k) {
        simd::axpy(x[k], d, gw.subspan(k * s.out, s.out));
      }
      simd::axpy(1.0, d, gb);
    }
  }
  return result;
}

PerExampleGrads backward_per_example(const MlpParams& mlp,
                                     const ForwardCache& cache,
                                     const Matrix& grad, GradientAt at) {
  const auto delta = layer_deltas(mlp, cache, grad, at, nullptr);
  const std::size_t rows = grad.rows();
  PerExampleGrads out{Matrix(rows, mlp.param_count())};
  parallel_for(rows, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      auto g = out.example(i);
      for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
        const auto& s = mlp.layer(l);
        const auto x = cache.post[l].row(i);
        const auto d = delta[l].row(i);
        for (std::size_t k = 0; k < s.in; ++k) {
          simd::axpy(x[k], d, g.subspan(s.weight_offset + k * s.out, s.out));
        }
        simd::axpy(1.0, d, g.subspan(s.bias_offset, s.out));
      }
    }
  });
  return out;
}

PerExampleGrads backward_per_example(const MlpParams& mlp, const Matrix& batch,
                                     const Matrix& output_grad) {
  return backward_per_example(mlp, forward(mlp, batch), output_grad);
}

AdamWState AdamWState::for_params(const MlpParams& mlp, AdamWHyper hyper) {
  AdamWState s;
  s.hyper = hyper;
  s.first_moment.assign(mlp.param_count(), 0.0);
  s.second_moment.assign(mlp.param_count(), 0.0);
  return s;
}

void adamw_update(MlpParams& params, std::span<const double> grad,
                  AdamWState& state, std::span<const ParamRange> trainable) {
  const std::size_t n = params.param_count();
  if (grad.size() != n || state.first_moment.size() != n ||
      state.second_moment.size() != n) {
    throw ShapeError("adamw_update: gradient/state size does not match params");
  }
  ++state.step_count;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step_count);
  const simd::AdamWCoefficients c{
      h.beta1,        h.beta2,
      h.eps,          h.learning_rate,
      h.weight_decay, 1.0 - std::pow(h.beta1, t),
      1.0 - std::pow(h.beta2, t)};
  auto p = params.values();
  const ParamRange all{0, n};
  const std::span<const ParamRange> ranges =
      trainable.empty() ? std::span<const ParamRange>(&all, 1) : trainable;
  for (const auto& r : ranges) {
    if (r.begin > r.end || r.end > n) throw ShapeError("bad trainable range");
    simd::kernels().adamw(c, p.data() + r.begin, grad.data() + r.begin,
                          state.first_moment.data() + r.begin,
                          state.second_moment.data() + r.begin,
                          r.end - r.begin);
  }
}

}  // namespace dpda
