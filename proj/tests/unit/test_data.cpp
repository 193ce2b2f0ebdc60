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

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dpda/data.hpp"
#include "dpda/error.hpp"
#include "dpda/pipeline.hpp"
#include "dpda/rng.hpp"

using namespace dpda;

namespace {

bool same_dataset(const Dataset& a, const Dataset& b) {
  return a.features == b.features && a.labels == b.labels &&
         a.label_matrix == b.label_matrix && a.mode == b.mode &&
         a.class_names == b.class_names;
}

std::vector<double> column_means(const Matrix& x) {
  std::vector<double> m(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) m[j] += x(i, j) / x.rows();
  }
  return m;
}

Dataset reparse(const Dataset& d, LabelMode mode) {
  std::ostringstream out;
  write_csv(out, d);
  std::istringstream in(out.str());
  CsvSchema schema;
  schema.mode = mode;
  return parse_csv(in, schema);
}

}  // namespace

TEST_SUITE("synth-data") {

TEST_CASE("generation is deterministic per seed") {
  DomainSpec spec;
  spec.samples_per_class = 40;
  spec.seed = 3;
  spec.label_noise = 0.1;
  spec.shift.rotation_deg = 30;
  const auto a = generate_pair(spec);
  const auto b = generate_pair(spec);
  CHECK(same_dataset(a.first, b.first));
  CHECK(same_dataset(a.second, b.second));
  spec.seed = 4;
  CHECK_FALSE(same_dataset(generate_pair(spec).first, a.first));
  CHECK(a.first.rows() == 160);
  CHECK(a.first.dim() == 16);
  CHECK(a.first.class_names == default_class_names(4));
}

TEST_CASE("zero shift makes the domains indistinguishable") {
  DomainSpec spec;
  spec.seed = 5;
  const auto [s, t] = generate_pair(spec);
  const auto ms = column_means(s.features);
  const auto mt = column_means(t.features);
  // Pooled per-coordinate variance is at most radius^2 / 2 + scale^2.
  const double sd = std::sqrt(spec.radius * spec.radius / 2 + 1.0);
  const double se = sd * std::sqrt(2.0 / s.rows());
  for (std::size_t j = 0; j < spec.dim; ++j) CHECK(std::abs(ms[j] - mt[j]) <= 3 * se);
}

TEST_CASE("class means sit on the circle") {
  DomainSpec spec;
  spec.seed = 6;
  spec.radius = 4.0;
  spec.within_scale = 0.8;
  const auto [s, t] = generate_pair(spec);
  const double tol = 4 * spec.within_scale / std::sqrt(double(spec.samples_per_class));
  for (int c = 0; c < 4; ++c) {
    std::vector<double> m(spec.dim, 0.0);
    for (std::size_t i = 0; i < s.rows(); ++i) {
      if (s.labels[i] != c) continue;
      for (std::size_t j = 0; j < spec.dim; ++j) m[j] += s.features(i, j) / spec.samples_per_class;
    }
    CHECK(std::abs(std::hypot(m[0], m[1]) - spec.radius) <= std::sqrt(2.0) * tol);
    for (std::size_t j = 2; j < spec.dim; ++j) CHECK(std::abs(m[j]) <= tol);
  }
}

TEST_CASE("realized label noise matches the rate") {
  DomainSpec spec;
  spec.seed = 7;
  spec.radius = 50.0;
  spec.within_scale = 0.1;
  spec.samples_per_class = 2000;
  spec.label_noise = 0.15;
  const auto [s, t] = generate_pair(spec);
  // Clean target labels identify each cluster centre.
  std::vector<std::vector<double>> centre(4, std::vector<double>(2, 0.0));
  for (std::size_t i = 0; i < t.rows(); ++i) {
    centre[t.labels[i]][0] += t.features(i, 0) / spec.samples_per_class;
    centre[t.labels[i]][1] += t.features(i, 1) / spec.samples_per_class;
  }
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    int nearest = 0;
    double best = 1e300;
    for (int c = 0; c < 4; ++c) {
      const double d = std::hypot(s.features(i, 0) - centre[c][0], s.features(i, 1) - centre[c][1]);
      if (d < best) best = d, nearest = c;
    }
    flipped += nearest != s.labels[i];
  }
  const double n = s.rows();
  const double rate = flipped / n;
  CHECK(std::abs(rate - 0.15) <= 4 * std::sqrt(0.15 * 0.85 / n));
  for (int y : t.labels) CHECK((y >= 0 && y < 4));
}

TEST_CASE("rotation lowers no-adapt accuracy monotonically") {
  const double angles[] = {0, 15, 30, 45, 60};
  std::vector<double> mean_acc(5, 0.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    DomainSpec spec;
    spec.seed = seed;
    spec.samples_per_class = 200;
    PretrainConfig cfg;
    cfg.seed = seed;
    cfg.learning_rate = 1e-3;
    cfg.steps = 300;
    Pretrained model;
    for (std::size_t a = 0; a < 5; ++a) {
      spec.shift.rotation_deg = angles[a];
      const auto [s, t] = generate_pair(spec);
      if (a == 0) model = pretrain_source(s, cfg);
      mean_acc[a] += evaluate(model.encoder, model.classifier, t).accuracy / 5;
    }
  }
  for (std::size_t a = 1; a < 5; ++a) CHECK(mean_acc[a] <= mean_acc[a - 1]);
  CHECK(mean_acc[4] < mean_acc[0]);
}

TEST_CASE("multilabel generation") {
  DomainSpec spec;
  spec.seed = 8;
  spec.samples_per_class = 100;
  spec.label_mode = LabelMode::kMultilabel;
  const auto [s, t] = generate_pair(spec);
  CHECK(s.label_matrix.rows() == s.rows());
  CHECK(s.label_matrix.cols() == 4);
  double positives = 0;
  for (double v : s.label_matrix.values()) {
    CHECK((v == 0.0 || v == 1.0));
    positives += v;
  }
  CHECK(positives > 0);
  CHECK(positives < s.label_matrix.size());
}

TEST_CASE("spec validation") {
  DomainSpec spec;
  spec.dim = 1;
  CHECK_THROWS_AS(generate_pair(spec), ConfigError);
  spec = DomainSpec{};
  spec.label_noise = 1.0;
  CHECK_THROWS_AS(generate_pair(spec), ConfigError);
  spec = DomainSpec{};
  spec.shift.translation = {1.0};
  CHECK_THROWS_AS(generate_pair(spec), ConfigError);
}

TEST_CASE("csv parsing") {
  SUBCASE("two rows") {
    std::istringstream in("feat_0,feat_1,label\n1.5,2,cat\n-3,4e-2,dog\n");
    const Dataset d = parse_csv(in, {});
    CHECK(d.rows() == 2);
    CHECK(d.features(1, 1) == 0.04);
    CHECK(d.class_names == std::vector<std::string>{"cat", "dog"});
    CHECK(d.labels == std::vector<int>{0, 1});
  }
  SUBCASE("non-numeric feature names its line") {
    std::string text = "feat_0,label\n";
    for (int i = 0; i < 5; ++i) text += "1,a\n";
    text += "oops,a\n";
    std::istringstream in(text);
    try {
      parse_csv(in, {});
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 7);
      CHECK(std::string(e.what()).find("line 7") != std::string::npos);
    }
  }
  SUBCASE("ragged row") {
    std::istringstream in("feat_0,feat_1,label\n1,2,a\n1,a\n");
    CHECK_THROWS_AS(parse_csv(in, {}), ParseError);
  }
  SUBCASE("unknown label with a fixed class list") {
    std::istringstream in("feat_0,label\n1,a\n2,z\n");
    CsvSchema schema;
    schema.known_classes = {"a", "b"};
    try {
      parse_csv(in, schema);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("multilabel columns") {
    std::istringstream in("feat_0,y_x,y_y\n1,1,0\n2,1,1\n");
    CsvSchema schema;
    schema.mode = LabelMode::kMultilabel;
    const Dataset d = parse_csv(in, schema);
    CHECK(d.class_names == std::vector<std::string>{"x", "y"});
    CHECK(d.label_matrix == Matrix{{1, 0}, {1, 1}});
    std::istringstream bad("feat_0,y_x\n1,2\n");
    CHECK_THROWS_AS(parse_csv(bad, schema), ParseError);
  }
  SUBCASE("load_csv reports the path and line") {
    CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", {}), ParseError);
  }
}

TEST_CASE("csv round trip over randomized files") {
  Rng rng = substream(9, "csv");
  for (int trial = 0; trial < 20; ++trial) {
    DomainSpec spec;
    spec.seed = trial;
    spec.dim = 2 + trial % 5;
    spec.n_classes = 2 + trial % 3;
    spec.samples_per_class = 3 + trial;
    spec.label_mode = trial % 2 ? LabelMode::kMultilabel : LabelMode::kMulticlass;
    spec.within_scale = std::exp(3 * standard_normal(rng));
    const Dataset first = reparse(generate_pair(spec).first, spec.label_mode);
    const Dataset second = reparse(first, spec.label_mode);
    CHECK(same_dataset(first, second));
  }
}

}  // TEST_SUITE
