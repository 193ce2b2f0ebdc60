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

#include "dpda/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <ostream>

#include "dpda/error.hpp"

namespace dpda {

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

namespace {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

Metrics finish(const std::vector<Counts>& counts, std::size_t rows,
               std::size_t exact, std::span<const std::string> names) {
  Metrics m;
  m.rows = rows;
  m.accuracy = rows ? static_cast<double>(exact) / static_cast<double>(rows) : 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const auto& k = counts[c];
    ClassMetrics cm;
    cm.name = c < names.size() ? names[c] : std::to_string(c);
    cm.support = k.tp + k.fn;
    cm.precision = k.tp + k.fp ? static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fp) : 0.0;
    cm.recall = k.tp + k.fn ? static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fn) : 0.0;
    cm.f1 = f1_score(cm.precision, cm.recall);
    m.macro_precision += cm.precision;
    m.macro_recall += cm.recall;
    m.macro_f1 += cm.f1;
    m.per_class.push_back(std::move(cm));
  }
  const double n = static_cast<double>(counts.size());
  m.macro_precision /= n;
  m.macro_recall /= n;
  m.macro_f1 /= n;
  return m;
}

}  // namespace

Metrics multiclass_metrics(std::span<const int> truth, std::span<const int> predicted,
                           std::span<const std::string> class_names) {
  if (truth.empty()) throw ConfigError("cannot evaluate an empty dataset");
  if (truth.size() != predicted.size()) throw ShapeError("prediction count != label count");
  const std::size_t k = class_names.size();
  if (k == 0) throw ConfigError("no classes");
  std::vector<Counts> counts(k);
  std::size_t exact = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= k || static_cast<std::size_t>(p) >= k) {
      throw ConfigError("label out of range at row " + std::to_string(i));
    }
    if (t == p) {
      ++counts[t].tp;
      ++exact;
    } else {
      ++counts[p].fp;
      ++counts[t].fn;
    }
  }
  return finish(counts, truth.size(), exact, class_names);
}

Metrics multilabel_metrics(const Matrix& truth, const Matrix& predicted,
                           std::span<const std::string> class_names) {
  if (truth.rows() == 0) throw ConfigError("cannot evaluate an empty dataset");
  require_shape(predicted, truth.rows(), truth.cols(), "multilabel predictions");
  if (class_names.size() != truth.cols()) throw ShapeError("class names != label columns");
  std::vector<Counts> counts(truth.cols());
  std::size_t exact = 0;
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    bool all = true;
    for (std::size_t c = 0; c < truth.cols(); ++c) {
      const bool t = truth(i, c) != 0.0, p = predicted(i, c) != 0.0;
      if (t && p) ++counts[c].tp;
      if (!t && p) ++counts[c].fp;
      if (t && !p) ++counts[c].fn;
      all = all && t == p;
    }
    exact += all ? 1 : 0;
  }
  return finish(counts, truth.rows(), exact, class_names);
}

void write_metrics_csv(std::ostream& out, const Metrics& m) {
  char buf[160];
  out << "class,precision,recall,f1,support\n";
  for (const auto& c : m.per_class) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%zu", c.precision, c.recall, c.f1,
                  c.support);
    out << c.name << "," << buf << "\n";
  }
  std::snprintf(buf, sizeof buf, "macro,%.6f,%.6f,%.6f,%zu", m.macro_precision,
                m.macro_recall, m.macro_f1, m.rows);
  out << buf << "\n";
}

Pca2 pca2(const Matrix& x) {
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto d = static_cast<Eigen::Index>(x.cols());
  Pca2 out;
  out.coords = Matrix(x.rows(), 2);
  out.axes = Matrix(2, x.cols());
  out.variance.assign(2, 0.0);
  if (n == 0 || d == 0) return out;

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> data(x.values().data(), n, d);
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(n > 1 ? n - 1 : 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("PCA eigendecomposition failed");

  const Eigen::Index comps = std::min<Eigen::Index>(2, d);
  for (Eigen::Index c = 0; c < comps; ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - c);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0.0) v = -v;
    out.variance[c] = std::max(0.0, solver.eigenvalues()(d - 1 - c));
    for (Eigen::Index j = 0; j < d; ++j) out.axes(c, j) = v(j);
    const Eigen::VectorXd proj = centered * v;
    for (Eigen::Index i = 0; i < n; ++i) out.coords(i, c) = proj(i);
  }
  return out;
}

}  // namespace dpda
