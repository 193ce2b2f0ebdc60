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

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dpda/tensor.hpp"

namespace dpda {

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // rows whose true label includes this class
};

struct Metrics {
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;  // exact-match rate
  std::size_t rows = 0;
};

// f1 = 2pr / (p + r), or 0 when p + r == 0. A class never predicted has
// precision 0; a class with no support has recall 0.
double f1_score(double precision, double recall);

// One-vs-rest counts per class from integer labels.
Metrics multiclass_metrics(std::span<const int> truth, std::span<const int> predicted,
                           std::span<const std::string> class_names);

// truth and predicted are rows x classes of 0/1.
Metrics multilabel_metrics(const Matrix& truth, const Matrix& predicted,
                           std::span<const std::string> class_names);

// class,precision,recall,f1,support rows, then a `macro` row whose support
// is the row count.
void write_metrics_csv(std::ostream& out, const Metrics& m);

struct Pca2 {
  Matrix coords;                   // rows x 2
  Matrix axes;                     // 2 x dim, unit rows
  std::vector<double> variance;    // per component, descending
};

// Projection onto the top two eigenvectors of the sample covariance. Each
// axis is oriented so its largest-magnitude entry is positive. Inputs with
// a single column are padded with a zero axis.
Pca2 pca2(const Matrix& x);

}  // namespace dpda
