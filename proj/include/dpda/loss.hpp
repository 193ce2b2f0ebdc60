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

#include <span>
#include <vector>

#include "dpda/tensor.hpp"

namespace dpda {

// Floor applied to probabilities inside every log so that a zero
// probability costs -log(1e-12) instead of infinity.
inline constexpr double kProbabilityFloor = 1e-12;

// Softmax over exclusive classes, or one independent sigmoid per class.
enum class LabelMode { kMulticlass, kMultilabel };

double safe_log(double p);

// Row-wise softmax of logits / temperature, stabilized by subtracting the
// row max. Throws NumericError on non-finite logits, ConfigError when
// temperature <= 0.
Matrix softmax_rows(const Matrix& logits, double temperature = 1.0);

Matrix sigmoid(const Matrix& logits, double temperature = 1.0);

// Mean over rows of -sum_k y_k log p_k, with the probability floor.
double cross_entropy(const Matrix& probs, const Matrix& labels);

Matrix one_hot(std::span<const int> labels, std::size_t classes);

// Per-example loss values and the gradient of each example's own loss with
// respect to its logits (no 1/batch factor).
struct PerExampleLoss {
  std::vector<double> loss;
  Matrix grad;
  double mean() const;
};

// Softmax cross-entropy against integer class labels.
PerExampleLoss softmax_cross_entropy(const Matrix& logits,
                                     std::span<const int> labels);

// Independent sigmoid binary cross-entropy per class, summed over classes.
PerExampleLoss sigmoid_binary_cross_entropy(const Matrix& logits,
                                            const Matrix& targets);

}  // namespace dpda
