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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dpda/rng.hpp"
#include "dpda/tensor.hpp"

namespace dpda {

enum class Activation { kRelu, kIdentity, kSigmoid };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kIdentity;
  std::size_t weight_offset = 0;  // in x out block, row-major
  std::size_t bias_offset = 0;    // out entries
  std::size_t end() const { return bias_offset + out; }
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

// Half-open slice [begin, end) of a flat parameter vector.
struct ParamRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

using ParamVector = std::vector<double>;

// A chain of dense layers y = act(x W + b) with all parameters held in one
// flat vector, so gradient sets, clipping and optimizer state are plain
// vectors of the same length.
class MlpParams {
 public:
  MlpParams() = default;
  // dims = {input, hidden..., output}; one activation per layer.
  MlpParams(std::span<const std::size_t> dims,
            std::span<const Activation> activations);

  // Zero biases; weights N(0, 2/in) before relu, N(0, 1/in) otherwise.
  static MlpParams initialized(std::span<const std::size_t> dims,
                               std::span<const Activation> activations,
                               Rng& rng);

  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t layer_count() const { return layers_.size(); }
  std::size_t param_count() const { return values_.size(); }
  const LayerShape& layer(std::size_t l) const { return layers_.at(l); }
  const std::vector<LayerShape>& layers() const { return layers_; }
  ParamRange layer_range(std::size_t l) const;

  std::span<double> weight(std::size_t l);
  std::span<const double> weight(std::size_t l) const;
  std::span<double> bias(std::size_t l);
  std::span<const double> bias(std::size_t l) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  // Layers [first, last) as a standalone network.
  MlpParams slice(std::size_t first, std::size_t last) const;
  // a's layers followed by b's; b.input_dim() must equal a.output_dim().
  static MlpParams concat(const MlpParams& a, const MlpParams& b);

  friend bool operator==(const MlpParams&, const MlpParams&) = default;

 private:
  std::vector<LayerShape> layers_;
  ParamVector values_;
};

struct ForwardCache {
  std::vector<Matrix> pre;   // pre[l] = post[l] W_l + b_l
  std::vector<Matrix> post;  // post[0] = input, post[l + 1] = act(pre[l])
  const Matrix& outputs() const { return post.back(); }
  const Matrix& last_preactivation() const { return pre.back(); }
};

// Throws ShapeError when batch.cols() != mlp.input_dim().
ForwardCache forward(const MlpParams& mlp, const Matrix& batch);
Matrix predict(const MlpParams& mlp, const Matrix& batch);

// Where the incoming gradient is taken: with respect to the network outputs,
// or with respect to the last layer's pre-activation (e.g. loss computed on
// logits of a sigmoid head).
enum class GradientAt { kOutput, kLastPreActivation };

struct BackwardResult {
  ParamVector grad;   // summed over rows, rows accumulated in index order
  Matrix input_grad;  // empty unless requested
};

BackwardResult backward(const MlpParams& mlp, const ForwardCache& cache,
                        const Matrix& grad, GradientAt at = GradientAt::kOutput,
                        bool want_input_grad = false);

// One row of parameter gradients per batch row.
struct PerExampleGrads {
  Matrix rows;
  std::size_t examples() const { return rows.rows(); }
  std::span<double> example(std::size_t i) { return rows.row(i); }
  std::span<const double> example(std::size_t i) const { return rows.row(i); }
};

PerExampleGrads backward_per_example(const MlpParams& mlp,
                                     const ForwardCache& cache,
                                     const Matrix& grad,
                                     GradientAt at = GradientAt::kOutput);
PerExampleGrads backward_per_example(const MlpParams& mlp, const Matrix& batch,
                                     const Matrix& output_grad);

struct AdamWHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  AdamWHyper hyper;
  ParamVector first_moment;
  ParamVector second_moment;
  std::uint64_t step_count = 0;

  static AdamWState for_params(const MlpParams& mlp, AdamWHyper hyper);
};

// Decoupled weight decay (p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)).
// When `trainable` is non-empty only those slices move; the rest keep both
// their values and their moments.
void adamw_update(MlpParams& params, std::span<const double> grad,
                  AdamWState& state, std::span<const ParamRange> trainable = {});

}  // namespace dpda
