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

#include "dpda/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "dpda/error.hpp"
#include "dpda/rng.hpp"

namespace dpda {

void Dataset::validate() const {
  if (mode == LabelMode::kMulticlass) {
    if (labels.size() != features.rows()) throw ConfigError("label count != rows");
    for (int y : labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= classes()) {
        throw ConfigError("label " + std::to_string(y) + " out of range");
      }
    }
  } else {
    if (label_matrix.rows() != features.rows() || label_matrix.cols() != classes()) {
      throw ConfigError("multilabel matrix does not match rows x classes");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.mode = mode;
  out.class_names = class_names;
  out.domain = domain;
  out.features = gather_rows(features, rows);
  if (mode == LabelMode::kMulticlass) {
    for (std::size_t r : rows) out.labels.push_back(labels.at(r));
  } else {
    out.label_matrix = gather_rows(label_matrix, rows);
  }
  return out;
}

void DomainSpec::validate() const {
  if (n_classes < 2) throw ConfigError("data.n_classes must be >= 2");
  if (dim < 2) throw ConfigError("data.dim must be >= 2");
  if (samples_per_class == 0) throw ConfigError("data.samples_per_class must be >= 1");
  if (!(radius >= 0.0)) throw ConfigError("data.radius must be >= 0");
  if (!(within_scale > 0.0)) throw ConfigError("data.within_scale must be > 0");
  if (!(label_noise >= 0.0 && label_noise < 1.0)) {
    throw ConfigError("data.label_noise must be in [0, 1)");
  }
  if (!shift.translation.empty() && shift.translation.size() != dim) {
    throw ConfigError("data.translation needs dim entries");
  }
  if (!(shift.covariance_scale > 0.0)) throw ConfigError("data.covariance_scale must be > 0");
}

std::vector<std::string> default_class_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < n; ++c) names.push_back("class_" + std::to_string(c));
  return names;
}

namespace {

struct Geometry {
  std::vector<std::vector<double>> means;
};

Geometry class_geometry(const DomainSpec& spec) {
  Rng rng = substream(spec.seed, "data-means");
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  Geometry g;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    std::vector<double> m(spec.dim, 0.0);
    const double a = phase + 2.0 * std::numbers::pi * static_cast<double>(c) /
                                 static_cast<double>(spec.n_classes);
    m[0] = spec.radius * std::cos(a);
    m[1] = spec.radius * std::sin(a);
    g.means.push_back(std::move(m));
  }
  return g;
}

double plane_distance(std::span<const double> x, const std::vector<double>& mean) {
  return std::hypot(x[0] - mean[0], x[1] - mean[1]);
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Draws one domain. Latent points are generated unshifted; the shift is then
// applied to the features, so labels follow the data through the shift.
Dataset draw_domain(const DomainSpec& spec, const Geometry& geo,
                    std::size_t per_class, std::string_view stream,
                    const DomainShift* shift, bool noisy_labels) {
  Rng rng = substream(spec.seed, stream);
  const std::size_t k = spec.n_classes;
  const std::size_t n = per_class * k;
  Dataset ds;
  ds.mode = spec.label_mode;
  ds.class_names = default_class_names(k);
  ds.domain = std::string(stream);
  ds.features = Matrix(n, spec.dim);
  if (ds.mode == LabelMode::kMulticlass) {
    ds.labels.resize(n);
  } else {
    ds.label_matrix = Matrix(n, k);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  const double noise_sd =
      spec.within_scale * std::sqrt(shift ? shift->covariance_scale : 1.0);
  const double theta = shift ? shift->rotation_deg * std::numbers::pi / 180.0 : 0.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::size_t idx = 0; idx < n; ++idx) {
    const std::size_t row = order[idx];
    const std::size_t c = idx / per_class;
    auto x = ds.features.row(row);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      x[j] = geo.means[c][j] + noise_sd * standard_normal(rng);
    }
    if (ds.mode == LabelMode::kMulticlass) {
      int y = static_cast<int>(c);
      if (noisy_labels && spec.label_noise > 0.0 && unit(rng) < spec.label_noise) {
        const auto other = std::uniform_int_distribution<std::size_t>(0, k - 2)(rng);
        y = static_cast<int>(other >= c ? other + 1 : other);
      }
      ds.labels[row] = y;
    } else {
      const double reach = 0.75 * spec.radius;
      for (std::size_t j = 0; j < k; ++j) {
        const double p = logistic(2.0 * (reach - plane_distance(x, geo.means[j])) /
                                  spec.within_scale);
        bool on = unit(rng) < p;
        if (noisy_labels && spec.label_noise > 0.0 && unit(rng) < spec.label_noise) on = !on;
        ds.label_matrix(row, j) = on ? 1.0 : 0.0;
      }
    }
    if (shift) {
      const double x0 = x[0], x1 = x[1];
      x[0] = cs * x0 - sn * x1;
      x[1] = sn * x0 + cs * x1;
      if (!shift->translation.empty()) {
        for (std::size_t j = 0; j < spec.dim; ++j) x[j] += shift->translation[j];
      }
    }
  }
  return ds;
}

}  // namespace

std::pair<Dataset, Dataset> generate_pair(const DomainSpec& spec) {
  spec.validate();
  const Geometry geo = class_geometry(spec);
  Dataset source = draw_domain(spec, geo, spec.samples_per_class, "source",
                               nullptr, true);
  Dataset target = draw_domain(spec, geo, spec.samples_per_class, "target",
                               &spec.shift, false);
  return {std::move(source), std::move(target)};
}

Dataset generate_source_like(const DomainSpec& spec, std::size_t n_per_class,
                             std::string_view stream) {
  spec.validate();
  return draw_domain(spec, class_geometry(spec), n_per_class, stream, nullptr, true);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t start = 0;
    while (start < cell.size() && cell[start] == ' ') ++start;
    cells.push_back(cell.substr(start));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(begin, end, out);
  return r.ec == std::errc() && r.ptr == end && std::isfinite(out);
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Dataset parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV input", 1);
  const auto header = split_csv_line(line);
  std::vector<std::size_t> feature_cols;
  std::vector<std::size_t> label_cols;
  std::vector<std::string> label_names;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto& h = header[i];
    if (h.rfind("feat_", 0) == 0) {
      feature_cols.push_back(i);
    } else if (schema.mode == LabelMode::kMulticlass && h == schema.label_column) {
      label_cols.push_back(i);
    } else if (schema.mode == LabelMode::kMultilabel && h.rfind("y_", 0) == 0) {
      label_cols.push_back(i);
      label_names.push_back(h.substr(2));
    } else {
      throw ParseError("unexpected column '" + h + "'", 1);
    }
  }
  if (feature_cols.empty()) throw ParseError("no feat_* columns", 1);
  if (label_cols.empty()) throw ParseError("no label column(s)", 1);
  if (schema.mode == LabelMode::kMulticlass && label_cols.size() != 1) {
    throw ParseError("duplicate label column", 1);
  }

  Dataset ds;
  ds.mode = schema.mode;
  std::map<std::string, int> class_index;
  if (schema.mode == LabelMode::kMultilabel) {
    ds.class_names = label_names;
  } else {
    for (const auto& name : schema.known_classes) {
      class_index.emplace(name, static_cast<int>(ds.class_names.size()));
      ds.class_names.push_back(name);
    }
  }
  std::vector<double> feats;
  std::vector<double> multi;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(cells.size()),
                       line_no);
    }
    for (std::size_t c : feature_cols) {
      double v;
      if (!parse_double(cells[c], v)) {
        throw ParseError("non-numeric feature '" + cells[c] + "' in column " +
                             header[c],
                         line_no);
      }
      feats.push_back(v);
    }
    if (schema.mode == LabelMode::kMulticlass) {
      const auto& name = cells[label_cols[0]];
      auto it = class_index.find(name);
      if (it == class_index.end()) {
        if (!schema.known_classes.empty() || name.empty()) {
          throw ParseError("unknown label '" + name + "'", line_no);
        }
        it = class_index.emplace(name, static_cast<int>(ds.class_names.size())).first;
        ds.class_names.push_back(name);
      }
      ds.labels.push_back(it->second);
    } else {
      for (std::size_t c : label_cols) {
        if (cells[c] != "0" && cells[c] != "1") {
          throw ParseError("label '" + cells[c] + "' in column " + header[c] +
                               " is not 0/1",
                           line_no);
        }
        multi.push_back(cells[c] == "1" ? 1.0 : 0.0);
      }
    }
    ++rows;
  }
  ds.features = Matrix(rows, feature_cols.size(), std::move(feats));
  if (schema.mode == LabelMode::kMultilabel) {
    ds.label_matrix = Matrix(rows, label_cols.size(), std::move(multi));
  }
  return ds;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    Dataset ds = parse_csv(in, schema);
    ds.domain = path;
    return ds;
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_csv(std::ostream& out, const Dataset& data) {
  data.validate();
  for (std::size_t j = 0; j < data.dim(); ++j) out << (j ? "," : "") << "feat_" << j;
  if (data.mode == LabelMode::kMulticlass) {
    out << ",label\n";
  } else {
    for (const auto& name : data.class_names) out << ",y_" << name;
    out << "\n";
  }
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.dim(); ++j) {
      out << (j ? "," : "") << fmt17(data.features(i, j));
    }
    if (data.mode == LabelMode::kMulticlass) {
      out << "," << data.class_names[static_cast<std::size_t>(data.labels[i])];
    } else {
      for (std::size_t c = 0; c < data.classes(); ++c) {
        out << "," << (data.label_matrix(i, c) != 0.0 ? "1" : "0");
      }
    }
    out << "\n";
  }
}

void save_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_csv(out, data);
}

}  // namespace dpda
