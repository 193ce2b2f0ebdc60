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

#include "dpda/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dpda/error.hpp"

namespace dpda {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)
constexpr double kDegenerateMass = 1e-10;

double component_log_density(const GmmComponent& c, std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = x[j] - c.mean[j];
    acc += kLog2Pi + std::log(c.variance[j]) + d * d / c.variance[j];
  }
  return -0.5 * acc;
}

// Fills log(pi_k) + log N_k(x) into lp and returns log p(x).
double joint_log(const GmmModel& model, std::span<const double> x,
                 std::vector<double>& lp) {
  lp.resize(model.k());
  double max = -INFINITY;
  for (std::size_t k = 0; k < model.k(); ++k) {
    const auto& c = model.components[k];
    lp[k] = (c.weight > 0.0 ? std::log(c.weight) : -INFINITY) +
            component_log_density(c, x);
    max = std::max(max, lp[k]);
  }
  if (max == -INFINITY) return max;
  double total = 0.0;
  for (double v : lp) total += std::exp(v - max);
  return max + std::log(total);
}

std::vector<double> column_variance(const Matrix& x) {
  const double n = static_cast<double>(x.rows());
  std::vector<double> mean(x.cols(), 0.0), var(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) mean[j] += x(i, j);
  }
  for (double& m : mean) m /= n;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double d = x(i, j) - mean[j];
      var[j] += d * d;
    }
  }
  for (double& v : var) v = std::max(v / n, kVarianceFloor);
  return var;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

GmmModel kmeanspp_init(const Matrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows();
  GmmModel model;
  model.dim = x.cols();
  const auto global_var = column_variance(x);
  std::vector<double> d2(n, INFINITY);
  std::size_t next = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  for (std::size_t c = 0; c < k; ++c) {
    const auto center = x.row(next);
    model.components.push_back(
        {1.0 / static_cast<double>(k),
         std::vector<double>(center.begin(), center.end()), global_var});
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x.row(i), center));
      total += d2[i];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      next = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      continue;
    }
    double target = std::uniform_real_distribution<double>(0.0, total)(rng);
    next = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target < 0.0) {
        next = i;
        break;
      }
    }
  }
  return model;
}

// Returns mean log-likelihood and fills responsibilities.
double e_step(const GmmModel& model, const Matrix& x, Matrix& resp) {
  resp = Matrix(x.rows(), model.k());
  std::vector<double> lp;
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double lse = joint_log(model, x.row(i), lp);
    total += lse;
    auto r = resp.row(i);
    for (std::size_t k = 0; k < model.k(); ++k) r[k] = std::exp(lp[k] - lse);
  }
  return total / static_cast<double>(x.rows());
}

// Returns the number of components re-seeded.
std::size_t m_step(const Matrix& x, const Matrix& resp, GmmModel& model,
                   Rng& reseed_rng) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  std::size_t reseeded = 0;
  std::vector<double> mass(model.k(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < model.k(); ++k) mass[k] += resp(i, k);
  }
  const auto global_var = column_variance(x);
  for (std::size_t k = 0; k < model.k(); ++k) {
    auto& c = model.components[k];
    if (mass[k] < kDegenerateMass) {
      const std::size_t pick =
          std::uniform_int_distribution<std::size_t>(0, n - 1)(reseed_rng);
      c.mean.assign(x.row(pick).begin(), x.row(pick).end());
      c.variance = global_var;
      mass[k] = 1.0;
      ++reseeded;
      continue;
    }
    std::fill(c.mean.begin(), c.mean.end(), 0.0);
    std::fill(c.variance.begin(), c.variance.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = resp(i, k);
      for (std::size_t j = 0; j < d; ++j) c.mean[j] += r * x(i, j);
    }
    for (double& m : c.mean) m /= mass[k];
    for (std::size_t i = 0; i < n; ++i) {
      const double r = resp(i, k);
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x(i, j) - c.mean[j];
        c.variance[j] += r * diff * diff;
      }
    }
    for (double& v : c.variance) v = std::max(v / mass[k], kVarianceFloor);
  }
  double total_mass = 0.0;
  for (double m : mass) total_mass += m;
  for (std::size_t k = 0; k < model.k(); ++k) {
    model.components[k].weight = mass[k] / total_mass;
  }
  return reseeded;
}

}  // namespace

void GmmModel::validate() const {
  if (components.empty()) throw ConfigError("GMM needs at least one component");
  double total = 0.0;
  for (const auto& c : components) {
    if (c.mean.size() != dim || c.variance.size() != dim) {
      throw ShapeError("GMM component dimension mismatch");
    }
    for (double v : c.variance) {
      if (!(v >= kVarianceFloor)) throw ConfigError("GMM variance below floor");
    }
    if (!(c.weight >= 0.0)) throw ConfigError("negative GMM weight");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("GMM weights do not sum to 1");
}

std::vector<double> GmmModel::mixture_mean() const {
  std::vector<double> m(dim, 0.0);
  for (const auto& c : components) {
    for (std::size_t j = 0; j < dim; ++j) m[j] += c.weight * c.mean[j];
  }
  return m;
}

std::vector<double> GmmModel::mixture_variance() const {
  const auto m = mixture_mean();
  std::vector<double> v(dim, 0.0);
  for (const auto& c : components) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = c.mean[j] - m[j];
      v[j] += c.weight * (c.variance[j] + d * d);
    }
  }
  return v;
}

EmFit em_fit(const Matrix& features, const EmOptions& options) {
  if (options.k == 0) throw ConfigError("GMM K must be >= 1");
  if (features.rows() < options.k) {
    throw ConfigError("GMM fit needs at least K = " + std::to_string(options.k) +
                      " rows, got " + std::to_string(features.rows()));
  }
  if (!features.all_finite()) throw NumericError("GMM fit on non-finite features");
  Rng init_rng = substream(options.seed, "gmm-init");
  Rng reseed_rng = substream(options.seed, "gmm-reseed");

  EmFit fit;
  fit.model = kmeanspp_init(features, options.k, init_rng);
  Matrix resp;
  double ll = e_step(fit.model, features, resp);
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    fit.reseeded_components += m_step(features, resp, fit.model, reseed_rng);
    const double next = e_step(fit.model, features, resp);
    fit.log_likelihood_trace.push_back(next);
    fit.iterations = it;
    if (std::abs(next - ll) < options.tol) {
      fit.converged = true;
      break;
    }
    ll = next;
  }
  return fit;
}

double log_density(const GmmModel& model, std::span<const double> x) {
  if (x.size() != model.dim) throw ShapeError("GMM point dimension mismatch");
  std::vector<double> lp;
  return joint_log(model, x, lp);
}

double log_likelihood(const GmmModel& model, const Matrix& x) {
  if (x.cols() != model.dim) {
    throw ShapeError("log_likelihood: data has " + std::to_string(x.cols()) +
                     " columns, model dim is " + std::to_string(model.dim));
  }
  if (x.rows() == 0) return 0.0;
  std::vector<double> lp;
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) total += joint_log(model, x.row(i), lp);
  return total / static_cast<double>(x.rows());
}

Matrix responsibilities(const GmmModel& model, const Matrix& x) {
  if (x.cols() != model.dim) throw ShapeError("responsibilities: dim mismatch");
  Matrix resp;
  e_step(model, x, resp);
  return resp;
}

double bic(const GmmModel& model, const Matrix& x) {
  const double params = static_cast<double>(model.k() * (2 * model.dim + 1) - 1);
  const double n = static_cast<double>(x.rows());
  return params * std::log(n) - 2.0 * n * log_likelihood(model, x);
}

GmmSample sample(const GmmModel& model, std::size_t n, Rng& rng) {
  std::vector<double> weights;
  for (const auto& c : model.components) weights.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  GmmSample out{Matrix(n, model.dim), std::vector<std::size_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = pick(rng);
    out.component_ids[i] = k;
    const auto& c = model.components[k];
    auto row = out.features.row(i);
    for (std::size_t j = 0; j < model.dim; ++j) {
      row[j] = c.mean[j] + std::sqrt(c.variance[j]) * standard_normal(rng);
    }
  }
  return out;
}

ClassFitResult fit_class_conditional(const Matrix& features,
                                     std::span<const int> labels,
                                     std::size_t classes,
                                     const ClassFitOptions& options) {
  if (labels.size() != features.rows()) {
    throw ShapeError("fit_class_conditional: label count != feature rows");
  }
  ClassFitResult result;
  result.gmms.dim = features.cols();
  const auto fit_one = [&](const Matrix& rows, int label, std::uint64_t index) {
    EmOptions em{options.k_per_class, options.tol, options.max_iter,
                 derive_seed(options.seed, "gmm-class", index)};
    if (rows.rows() < em.k) {
      result.notes.push_back("class " + std::to_string(label) + ": K reduced from " +
                             std::to_string(em.k) + " to " +
                             std::to_string(rows.rows()));
      em.k = rows.rows();
    }
    EmFit fit = em_fit(rows, em);
    if (fit.reseeded_components > 0) {
      result.notes.push_back("class " + std::to_string(label) + ": " +
                             std::to_string(fit.reseeded_components) +
                             " component re-seeds");
    }
    result.gmms.by_class[label] = std::move(fit.model);
  };

  if (options.pooled) {
    if (features.rows() == 0) throw ConfigError("no features to fit");
    fit_one(features, kPooledClass, 0);
    return result;
  }
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == static_cast<int>(c)) rows.push_back(i);
    }
    if (rows.empty()) {
      throw ConfigError("class " + std::to_string(c) + " has no source rows");
    }
    fit_one(gather_rows(features, rows), static_cast<int>(c), c);
  }
  return result;
}

LabeledSample sample_labeled(const ClassConditionalGmms& gmms, std::size_t n,
                             Rng& rng) {
  if (gmms.by_class.empty()) throw ConfigError("no class mixtures to sample");
  std::vector<int> classes;
  std::vector<const GmmModel*> models;
  for (const auto& [label, model] : gmms.by_class) {
    classes.push_back(label);
    models.push_back(&model);
  }
  std::uniform_int_distribution<std::size_t> pick(0, classes.size() - 1);
  LabeledSample out{Matrix(n, gmms.dim), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = pick(rng);
    out.labels[i] = classes[c];
    const GmmSample one = sample(*models[c], 1, rng);
    std::copy_n(one.features.row(0).begin(), gmms.dim, out.features.row(i).begin());
  }
  return out;
}

}  // namespace dpda
