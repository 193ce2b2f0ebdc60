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

#include <cmath>
#include <random>
#include <vector>

#include "dpda/mlp.hpp"
#include "dpda/rng.hpp"
#include "dpda/tensor.hpp"

namespace dpda::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                            double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * standard_normal(rng);
  return m;
}

inline std::vector<int> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(classes) - 1);
  std::vector<int> y(n);
  for (int& v : y) v = pick(rng);
  return y;
}

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

// Central finite difference of f with respect to x[i].
template <typename F>
double central_difference(F&& f, std::span<double> x, std::size_t i, double h = 1e-5) {
  const double saved = x[i];
  x[i] = saved + h;
  const double up = f();
  x[i] = saved - h;
  const double down = f();
  x[i] = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace dpda::test
