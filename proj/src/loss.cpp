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

#include "dpda/loss.hpp"

#include <algorithm>
#include <cmath>

#include "dpda/error.hpp"

namespace dpda {

double safe_log(double p) { return std::log(std::max(p, kProbabilityFloor)); }

Matrix softmax_rows(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("softmax temperature must be > 0");
  if (!logits.all_finite()) throw NumericError("softmax_rows: non-finite logits");
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    auto p = out.row(i);
    double max = -INFINITY;
    for (double v : z) max = std::max(max, v / temperature);
    double total = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      p[k] = std::exp(z[k] / temperature - max);
      total += p[k];
    }
    for (double& v : p) v /= total;
  }
  return out;
}

Matrix sigmoid(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("sigmoid temperature must be > 0");
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits.values()[i] / temperature;
    out.values()[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                             : std::exp(x) / (1.0 + std::exp(x));
  }
  return out;
}

double cross_entropy(const Matrix& probs, const Matrix& labels) {
  require_shape(labels, probs.rows(), probs.cols(), "cross_entropy labels");
  if (probs.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double row = 0.0;
    for (std::size_t k = 0; k < probs.cols(); ++k) {
      if (labels(i, k) != 0.0) row -= labels(i, k) * safe_log(probs(i, k));
    }
    total += row;
  }
  return total / static_cast<double>(probs.rows());
}

Matrix one_hot(std::span<const int> labels, std::size_t classes) {
  Matrix out(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ShapeError("label out of range");
    }
    out(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return out;
}

double PerExampleLoss::mean() const {
  if (loss.empty()) return 0.0;
  double total = 0.0;
  for (double v : loss) total += v;
  return total / static_cast<double>(loss.size());
}

PerExampleLoss softmax_cross_entropy(const Matrix& logits,
                                     std::span<const int> labels) {
  if (labels.size() != logits.rows()) {
    throw ShapeError("softmax_cross_entropy: label count != rows");
  }
  PerExampleLoss out;
  out.grad = softmax_rows(logits);
  out.loss.resize(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) {
      throw ShapeError("label out of range");
    }
    out.loss[i] = -safe_log(out.grad(i, static_cast<std::size_t>(y)));
    out.grad(i, static_cast<std::size_t>(y)) -= 1.0;
  }
  return out;
}

PerExampleLoss sigmoid_binary_cross_entropy(const Matrix& logits,
                                            const Matrix& targets) {
  require_shape(targets, logits.rows(), logits.cols(), "binary targets");
  PerExampleLoss out;
  out.grad = sigmoid(logits);
  out.loss.assign(logits.rows(), 0.0);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    for (std::size_t k = 0; k < logits.cols(); ++k) {
      const double z = logits(i, k);
      const double y = targets(i, k);
      // log(1 + e^z) - y z, written to avoid overflow.
      const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
      out.loss[i] += softplus - y * z;
      out.grad(i, k) -= y;
    }
  }
  return out;
}

}  // namespace dpda
