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
#include <span>
#include <string_view>

// Data-parallel inner loops used by the network, optimizer and DP code.
//
// Every kernel has a scalar reference implementation and an AVX2 variant.
// The variants are bit-identical to the references: elementwise kernels
// perform the same IEEE operations in the same order, and reductions use a
// fixed four-lane accumulation pattern that the scalar code reproduces
// exactly. The active variant is chosen once at startup from CPUID and can
// be overridden with DPDA_SIMD=scalar|avx2 or set_isa().

namespace dpda::simd {

enum class Isa { kScalar, kAvx2 };

struct AdamWCoefficients {
  double beta1;
  double beta2;
  double eps;
  double learning_rate;
  double weight_decay;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // sum x[i] * y[i], lanes i % 4 combined as (l0 + l1) + (l2 + l3)
  double (*dot)(const double* x, const double* y, std::size_t n);
  // x[i] *= a
  void (*scale)(double a, double* x, std::size_t n);
  // y[i] = max(x[i], 0)
  void (*relu)(const double* x, double* y, std::size_t n);
  // g[i] = pre[i] > 0 ? g[i] : 0
  void (*relu_mask)(const double* pre, double* g, std::size_t n);
  void (*adamw)(const AdamWCoefficients& c, double* param, const double* grad,
                double* m, double* v, std::size_t n);
};

bool isa_supported(Isa isa);
Isa active_isa();
// Throws std::invalid_argument when the CPU lacks the requested ISA.
void set_isa(Isa isa);
std::string_view isa_name(Isa isa);

const KernelTable& kernels();
const KernelTable& kernels_for(Isa isa);

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  kernels().axpy(a, x.data(), y.data(), x.size());
}
inline double dot(std::span<const double> x, std::span<const double> y) {
  return kernels().dot(x.data(), y.data(), x.size());
}
inline double sum_squares(std::span<const double> x) {
  return kernels().dot(x.data(), x.data(), x.size());
}
inline void scale(double a, std::span<double> x) {
  kernels().scale(a, x.data(), x.size());
}

namespace detail {
extern const KernelTable kScalarTable;
extern const KernelTable kAvx2Table;
bool avx2_compiled();
}  // namespace detail

}  // namespace dpda::simd
