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

// Reference kernels. These define the arithmetic; the vector variants must
// reproduce them bit for bit.

#include <cmath>

#include "dpda/simd.hpp"

namespace dpda::simd {
namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double p = a * x[i];
    y[i] = y[i] + p;
  }
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double p = x[i] * y[i];
    lane[i % 4] = lane[i % 4] + p;
  }
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void scale_scalar(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] * a;
}

void relu_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_scalar(const double* pre, double* g, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) g[i] = pre[i] > 0.0 ? g[i] : 0.0;
}

void adamw_scalar(const AdamWCoefficients& c, double* param,
                  const double* grad, double* m, double* v, std::size_t n) {
  const double decay = 1.0 - c.learning_rate * c.weight_decay;
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    const double mi = c.beta1 * m[i] + one_minus_b1 * g;
    const double vi = c.beta2 * v[i] + (one_minus_b2 * g) * g;
    m[i] = mi;
    v[i] = vi;
    const double m_hat = mi / c.bias_correction1;
    const double v_hat = vi / c.bias_correction2;
    const double update = m_hat / (std::sqrt(v_hat) + c.eps);
    const double decayed = param[i] * decay;
    param[i] = decayed - c.learning_rate * update;
  }
}

}  // namespace

namespace detail {
const KernelTable kScalarTable = {
    Isa::kScalar, axpy_scalar,      dot_scalar,  scale_scalar,
    relu_scalar,  relu_mask_scalar, adamw_scalar,
};
}  // namespace detail

}  // namespace dpda::simd
