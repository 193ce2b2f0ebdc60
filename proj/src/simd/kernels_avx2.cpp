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

// AVX2 variants of the reference kernels. No FMA: each product and sum is
// rounded separately, matching kernels_scalar.cpp.

#include <cmath>

#include "dpda/simd.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define DPDA_HAVE_AVX2_PATH 1
#include <immintrin.h>
#else
#define DPDA_HAVE_AVX2_PATH 0
#endif

namespace dpda::simd {

#if DPDA_HAVE_AVX2_PATH
namespace {

#define DPDA_AVX2 __attribute__((target("avx2")))

DPDA_AVX2 void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), p));
  }
  for (; i < n; ++i) {
    const double p = a * x[i];
    y[i] = y[i] + p;
  }
}

DPDA_AVX2 double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p =
        _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_add_pd(acc, p);
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  for (std::size_t j = 0; i < n; ++i, ++j) {
    const double p = x[i] * y[i];
    lane[j] = lane[j] + p;
  }
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

DPDA_AVX2 void scale_avx2(double a, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
  }
  for (; i < n; ++i) x[i] = x[i] * a;
}

DPDA_AVX2 void relu_avx2(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    const __m256d keep = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(y + i, _mm256_and_pd(v, keep));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

DPDA_AVX2 void relu_mask_avx2(const double* pre, double* g, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d keep =
        _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(g + i, _mm256_and_pd(_mm256_loadu_pd(g + i), keep));
  }
  for (; i < n; ++i) g[i] = pre[i] > 0.0 ? g[i] : 0.0;
}

DPDA_AVX2 void adamw_avx2(const AdamWCoefficients& c, double* param,
                          const double* grad, double* m, double* v,
                          std::size_t n) {
  const double decay = 1.0 - c.learning_rate * c.weight_decay;
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  const __m256d vb1 = _mm256_set1_pd(c.beta1);
  const __m256d vb2 = _mm256_set1_pd(c.beta2);
  const __m256d v1b1 = _mm256_set1_pd(one_minus_b1);
  const __m256d v1b2 = _mm256_set1_pd(one_minus_b2);
  const __m256d vbc1 = _mm256_set1_pd(c.bias_correction1);
  const __m256d vbc2 = _mm256_set1_pd(c.bias_correction2);
  const __m256d veps = _mm256_set1_pd(c.eps);
  const __m256d vlr = _mm256_set1_pd(c.learning_rate);
  const __m256d vdecay = _mm256_set1_pd(decay);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(v1b1, g));
    const __m256d vi =
        _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                      _mm256_mul_pd(_mm256_mul_pd(v1b2, g), g));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, vbc1);
    const __m256d v_hat = _mm256_div_pd(vi, vbc2);
    const __m256d update =
        _mm256_div_pd(m_hat, _mm256_add_pd(_mm256_sqrt_pd(v_hat), veps));
    const __m256d decayed = _mm256_mul_pd(_mm256_loadu_pd(param + i), vdecay);
    _mm256_storeu_pd(param + i,
                     _mm256_sub_pd(decayed, _mm256_mul_pd(vlr, update)));
  }
  for (; i < n; ++i) {
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

#undef DPDA_AVX2

}  // namespace

namespace detail {
const KernelTable kAvx2Table = {
    Isa::kAvx2, axpy_avx2,      dot_avx2,   scale_avx2,
    relu_avx2,  relu_mask_avx2, adamw_avx2,
};
bool avx2_compiled() { return true; }
}  // namespace detail

#else

namespace detail {
const KernelTable kAvx2Table = kScalarTable;
bool avx2_compiled() { return false; }
}  // namespace detail

#endif

}  // namespace dpda::simd
