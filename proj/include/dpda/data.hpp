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
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpda/loss.hpp"
#include "dpda/tensor.hpp"

namespace dpda {

struct Dataset {
  Matrix features;
  std::vector<int> labels;   // multiclass: class index per row
  Matrix label_matrix;       // multilabel: rows x classes of 0/1
  LabelMode mode = LabelMode::kMulticlass;
  std::vector<std::string> class_names;
  std::string domain;

  std::size_t rows() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  std::size_t classes() const { return class_names.size(); }
  // Row counts align and labels are within range; throws ConfigError.
  void validate() const;
  // Rows in the given order, labels carried along.
  Dataset subset(std::span<const std::size_t> rows) const;
};

struct DomainShift {
  double rotation_deg = 0.0;        // in the (x0, x1) plane, about the origin
  std::vector<double> translation;  // empty or dim entries
  double covariance_scale = 1.0;    // multiplies the within-class covariance
};

// Class means sit evenly spaced on the circle of the given radius in the
// (x0, x1) plane (random phase); remaining coordinates carry only isotropic
// within-class noise. The target domain is the source distribution with the
// shift applied. Label noise flips source labels to a uniformly chosen other
// class (multiclass) or flips each label bit (multilabel); target labels are
// clean.
struct DomainSpec {
  std::size_t n_classes = 4;
  std::size_t dim = 16;
  std::size_t samples_per_class = 500;
  double radius = 3.0;
  double within_scale = 1.0;  // within-class standard deviation
  DomainShift shift;
  LabelMode label_mode = LabelMode::kMulticlass;
  double label_noise = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<std::string> default_class_names(std::size_t n);

std::pair<Dataset, Dataset> generate_pair(const DomainSpec& spec);

// Draws `n_per_class` fresh source-distribution rows (no shift) under the
// given stream name; used for disjoint member / non-member populations.
Dataset generate_source_like(const DomainSpec& spec, std::size_t n_per_class,
                             std::string_view stream);

struct CsvSchema {
  LabelMode mode = LabelMode::kMulticlass;
  std::string label_column = "label";
  // When non-empty, multiclass labels map onto these names and any other
  // label is a parse error; otherwise names are assigned in first-seen order.
  std::vector<std::string> known_classes;
};

// Header: feat_0..feat_{d-1} then `label` (multiclass) or y_<class>...
// (multilabel). Errors carry the 1-based line number.
Dataset parse_csv(std::istream& in, const CsvSchema& schema);
Dataset load_csv(const std::string& path, const CsvSchema& schema);
void write_csv(std::ostream& out, const Dataset& data);
void save_csv(const std::string& path, const Dataset& data);

}  // namespace dpda
