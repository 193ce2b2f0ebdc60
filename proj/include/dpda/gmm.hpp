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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dpda/rng.hpp"
#include "dpda/tensor.hpp"

namespace dpda {

inline constexpr double kVarianceFloor = 1e-6;

struct GmmComponent {
  double weight = 0.0;
  std::vector<double> mean;
  std::vector<double> variance;  // diagonal
  friend bool operator==(const GmmComponent&, const GmmComponent&) = default;
};

// Diagonal-covariance Gaussian mixture.
struct GmmModel {
  std::size_t dim = 0;
  std::vector<GmmComponent> components;

  std::size_t k() const { return components.size(); }
  // Weights sum to 1 within 1e-9, variances >= floor, dims consistent.
  void validate() const;
  std::vector<double> mixture_mean() const;
  std::vector<double> mixture_variance() const;

  friend bool operator==(const GmmModel&, const GmmModel&) = default;
};

struct EmOptions {
  std::size_t k = 6;
  double tol = 1e-6;
  std::size_t max_iter = 200;
  std::uint64_t seed = 0;
};

struct EmFit {
  GmmModel model;
  // Mean log-likelihood after each M-step.
  std::vector<double> log_likelihood_trace;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t reseeded_components = 0;
};

// k-means++ seeding, then EM until |delta mean LL| < tol or max_iter M-steps.
// Components that lose all responsibility mass are re-seeded at a random
// data point.
EmFit em_fit(const Matrix& features, const EmOptions& options);

// Mean over rows of log p(x).
double log_likelihood(const GmmModel& model, const Matrix& x);
// log p(x) of one point.
double log_density(const GmmModel& model, std::span<const double> x);
// Row-wise responsibilities (rows sum to 1).
Matrix responsibilities(const GmmModel& model, const Matrix& x);

double bic(const GmmModel& model, const Matrix& x);

struct GmmSample {
  Matrix features;
  std::vector<std::size_t> component_ids;
};

GmmSample sample(const GmmModel& model, std::size_t n, Rng& rng);

// Per-class mixtures over a shared feature dimension. In pooled mode a single
// mixture is stored under kPooledClass and samples carry no class label.
inline constexpr int kPooledClass = -1;

struct ClassConditionalGmms {
  std::size_t dim = 0;
  std::map<int, GmmModel> by_class;
  bool pooled() const { return by_class.size() == 1 && by_class.count(kPooledClass); }
  friend bool operator==(const ClassConditionalGmms&, const ClassConditionalGmms&) = default;
};

struct ClassFitOptions {
  std::size_t k_per_class = 6;
  double tol = 1e-6;
  std::size_t max_iter = 200;
  std::uint64_t seed = 0;
  bool pooled = false;
};

struct ClassFitResult {
  ClassConditionalGmms gmms;
  std::vector<std::string> notes;  // K reductions, re-seeds
};

// Fits one mixture per label value in [0, classes). A class with fewer rows
// than k_per_class gets K reduced to its row count; an empty class is a
// ConfigError.
ClassFitResult fit_class_conditional(const Matrix& features,
                                     std::span<const int> labels,
                                     std::size_t classes,
                                     const ClassFitOptions& options);

struct LabeledSample {
  Matrix features;
  std::vector<int> labels;  // kPooledClass in pooled mode
};

// Classes are drawn uniformly, then a feature from that class's mixture.
LabeledSample sample_labeled(const ClassConditionalGmms& gmms, std::size_t n,
                             Rng& rng);

}  // namespace dpda
