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

#include "dpda/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpda/error.hpp"

namespace dpda {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                     " != " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy_n(m.row(rows[i]).begin(), m.cols(), out.row(i).begin());
  }
  return out;
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                   const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) +
                     "x" + std::to_string(cols) + ", got " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

}  // namespace dpda
