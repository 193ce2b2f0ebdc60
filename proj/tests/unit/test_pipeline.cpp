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
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dpda/error.hpp"
#include "dpda/metrics.hpp"
#include "dpda/pipeline.hpp"
#include "dpda/share.hpp"
#include "helpers.hpp"

using namespace dpda;
using dpda::test::random_labels;
using dpda::test::random_matrix;

namespace {

Dataset separable_2d(std::size_t n, std::uint64_t seed) {
  Rng rng = substream(seed, "sep");
  Dataset d;
  d.class_names = {"neg", "pos"};
  d.features = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    d.features(i, 0) = (y ? 1.5 : -1.5) + 0.4 * standard_normal(rng);
    d.features(i, 1) = standard_normal(rng);
    d.labels.push_back(y);
  }
  return d;
}

struct Fixture {
  Dataset source;
  Dataset target;
  Pretrained model;
  SharePackage package;

  explicit Fixture(std::uint64_t seed, LabelMode mode = LabelMode::kMulticlass,
                   bool dp = false) {
    DomainSpec spec;
    spec.seed = seed;
    spec.samples_per_class = 60;
    spec.dim = 6;
    spec.label_mode = mode;
    spec.shift.rotation_deg = 30;
    std::tie(source, target) = generate_pair(spec);
    PretrainConfig cfg;
    cfg.model.encoder_hidden = {12};
    cfg.model.feature_dim = 4;
    cfg.learning_rate = 1e-2;
    cfg.steps = 80;
    cfg.batch_size = 16;
    cfg.seed = seed;
    cfg.dp = dp;
    cfg.target_epsilon = 5.0;
    model = pretrain_source(source, cfg);
    ShareConfig sc;
    sc.k = 2;
    sc.seed = seed;
    package = build_share(model, source, sc).package;
  }
};

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("perfect predictions") {
  const std::vector<int> y = {0, 1, 2, 1, 0};
  const std::vector<std::string> names = {"a", "b", "c"};
  const Metrics m = multiclass_metrics(y, y, names);
  for (const auto& c : m.per_class) {
    CHECK(c.precision == 1.0);
    CHECK(c.recall == 1.0);
    CHECK(c.f1 == 1.0);
  }
  CHECK(m.macro_f1 == 1.0);
  CHECK(m.accuracy == 1.0);
}

TEST_CASE("one-class predictions on balanced data") {
  const std::vector<int> y = {0, 1, 0, 1};
  const std::vector<int> p = {1, 1, 1, 1};
  const std::vector<std::string> names = {"a", "b"};
  const Metrics m = multiclass_metrics(y, p, names);
  CHECK(m.per_class[1].recall == 1.0);
  CHECK(m.per_class[1].precision == 0.5);
  CHECK(m.per_class[0].precision == 0.0);
  CHECK(m.per_class[0].f1 == 0.0);
  CHECK(m.per_class[0].support == 2);
}

TEST_CASE("random predictions against a confusion matrix") {
  Rng rng = substream(1, "metrics");
  const std::vector<std::string> names = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 20; ++trial) {
    const auto y = random_labels(200, 4, rng);
    const auto p = random_labels(200, 4, rng);
    int cm[4][4] = {};
    for (std::size_t i = 0; i < y.size(); ++i) ++cm[y[i]][p[i]];
    const Metrics m = multiclass_metrics(y, p, names);
    double macro = 0.0;
    for (int c = 0; c < 4; ++c) {
      double tp = cm[c][c], col = 0, row = 0;
      for (int k = 0; k < 4; ++k) col += cm[k][c], row += cm[c][k];
      const double prec = col ? tp / col : 0.0;
      const double rec = row ? tp / row : 0.0;
      const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
      CHECK(m.per_class[c].precision == doctest::Approx(prec).epsilon(1e-14));
      CHECK(m.per_class[c].recall == doctest::Approx(rec).epsilon(1e-14));
      CHECK(m.per_class[c].f1 == doctest::Approx(f1).epsilon(1e-14));
      // Harmonic-mean identity.
      CHECK(m.per_class[c].f1 * (prec + rec) == doctest::Approx(2 * prec * rec).epsilon(1e-12));
      macro += f1 / 4;
    }
    CHECK(m.macro_f1 == doctest::Approx(macro).epsilon(1e-14));
  }
}

TEST_CASE("multilabel metrics") {
  const Matrix t{{1, 0}, {1, 1}, {0, 1}};
  const Matrix p{{1, 1}, {0, 1}, {0, 1}};
  const std::vector<std::string> names = {"x", "y"};
  const Metrics m = multilabel_metrics(t, p, names);
  CHECK(m.per_class[0].precision == 1.0);
  CHECK(m.per_class[0].recall == 0.5);
  CHECK(m.per_class[1].precision == doctest::Approx(2.0 / 3));
  CHECK(m.per_class[1].recall == 1.0);
  CHECK(m.accuracy == doctest::Approx(1.0 / 3));
}

TEST_CASE("metrics csv") {
  const std::vector<int> y = {0, 1};
  const std::vector<std::string> names = {"a", "b"};
  std::ostringstream out;
  write_metrics_csv(out, multiclass_metrics(y, y, names));
  CHECK(out.str() ==
        "class,precision,recall,f1,support\n"
        "a,1.000000,1.000000,1.000000,1\n"
        "b,1.000000,1.000000,1.000000,1\n"
        "macro,1.000000,1.000000,1.000000,2\n");
}

TEST_CASE("pca projections") {
  SUBCASE("single sample") {
    const Pca2 p = pca2(Matrix{{3, -1, 2}});
    CHECK(p.coords == Matrix{{0, 0}});
  }
  SUBCASE("isotropic data splits variance evenly") {
    Rng rng = substream(2, "pca");
    const Pca2 p = pca2(random_matrix(20000, 2, rng));
    CHECK(std::abs(p.variance[0] - p.variance[1]) <= 0.1 * p.variance[0]);
  }
  SUBCASE("anisotropic gaussian aligns with the major axis") {
    Rng rng = substream(3, "pca");
    const double angle = 0.6;
    const double u[3] = {std::cos(angle) / std::sqrt(2.0), std::sin(angle), std::cos(angle) / std::sqrt(2.0)};
    Matrix x(5000, 3);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double major = 5 * standard_normal(rng);
      for (std::size_t j = 0; j < 3; ++j) x(i, j) = major * u[j] + 0.5 * standard_normal(rng);
    }
    const Pca2 p = pca2(x);
    double dot = 0.0;
    for (std::size_t j = 0; j < 3; ++j) dot += p.axes(0, j) * u[j];
    CHECK(std::acos(std::min(1.0, std::abs(dot))) * 180 / std::numbers::pi <= 5.0);
    CHECK(p.variance[0] > p.variance[1]);
    for (std::size_t r = 0; r < 2; ++r) {
      std::size_t big = 0;
      for (std::size_t j = 1; j < 3; ++j) {
        if (std::abs(p.axes(r, j)) > std::abs(p.axes(r, big))) big = j;
      }
      CHECK(p.axes(r, big) > 0);
    }
  }
}

}  // TEST_SUITE

TEST_SUITE("pipeline") {

TEST_CASE("separable data trains to high accuracy") {
  const Dataset d = separable_2d(400, 4);
  PretrainConfig cfg;
  cfg.model.encoder_hidden = {8};
  cfg.model.feature_dim = 4;
  cfg.learning_rate = 1e-2;
  cfg.steps = 500;
  cfg.batch_size = 32;
  const Pretrained m = pretrain_source(d, cfg);
  CHECK(evaluate(m.encoder, m.classifier, d).accuracy >= 0.99);
  CHECK_FALSE(m.receipt.has_value());
  CHECK(m.ledger.events.empty());
}

TEST_CASE("zero steps returns the initialization") {
  const Dataset d = separable_2d(40, 5);
  PretrainConfig cfg;
  cfg.steps = 0;
  cfg.seed = 9;
  const Pretrained a = pretrain_source(d, cfg);
  cfg.dp = true;
  const Pretrained b = pretrain_source(d, cfg);
  CHECK(a.encoder == b.encoder);
  CHECK(a.classifier == b.classifier);
  Rng rng = substream(9, "init");
  const std::size_t dims[] = {2, 64, 32, 16, 2};
  const Activation acts[] = {Activation::kRelu, Activation::kRelu, Activation::kIdentity,
                             Activation::kIdentity};
  const MlpParams init = MlpParams::initialized(dims, acts, rng);
  CHECK(MlpParams::concat(a.encoder, a.classifier) == init);
}

TEST_CASE("dp pretraining honours the epsilon target") {
  const Dataset d = separable_2d(200, 6);
  PretrainConfig cfg;
  cfg.dp = true;
  cfg.target_epsilon = 1.0;
  cfg.steps = 100;
  cfg.batch_size = 20;
  const Pretrained m = pretrain_source(d, cfg);
  REQUIRE(m.receipt.has_value());
  CHECK(m.receipt->epsilon <= 1.0);
  CHECK(m.receipt->epsilon > 0.99);
  CHECK(m.receipt->delta == 1e-5);
  CHECK(m.receipt->steps == 100);
  CHECK(m.receipt->q == doctest::Approx(0.1));
  CHECK(m.ledger.total_count() == 100);
}

TEST_CASE("pretraining errors") {
  Dataset d = separable_2d(10, 7);
  d.labels[3] = 5;
  CHECK_THROWS_AS(pretrain_source(d, PretrainConfig{}), ConfigError);
  CHECK_THROWS_AS(pretrain_source(Dataset{}, PretrainConfig{}), ConfigError);
  PretrainConfig bad;
  bad.learning_rate = 0;
  CHECK_THROWS_AS(pretrain_source(separable_2d(10, 7), bad), ConfigError);
}

TEST_CASE("share package codec") {
  const Fixture f(11, LabelMode::kMulticlass, true);
  const std::string text = serialize_share(f.package);
  const SharePackage back = parse_share(text);
  CHECK(back == f.package);
  CHECK(serialize_share(back) == text);
  Rng rng = substream(11, "probe");
  const Matrix probe = random_matrix(7, f.source.dim(), rng);
  CHECK(predict(back.classifier, predict(back.encoder, probe)) ==
        predict(f.package.classifier, predict(f.package.encoder, probe)));

  SUBCASE("top-level keys are exact") {
    for (const char* key : {"\"version\"", "\"encoder\"", "\"classifier\"", "\"gmms\"",
                            "\"privacy\"", "\"meta\""}) {
      CHECK(text.find(key) != std::string::npos);
    }
    std::string extra = text;
    extra.insert(extra.rfind('}'), ",\"extra\":1");
    CHECK_THROWS_AS(parse_share(extra), ParseError);
    CHECK_THROWS_AS(parse_share("{}"), ParseError);
    CHECK_THROWS_AS(parse_share("not json"), ParseError);
  }
  SUBCASE("non-private marker") {
    SharePackage np = f.package;
    np.privacy.reset();
    const std::string t = serialize_share(np);
    CHECK(t.find("\"privacy\": \"non-private\"") != std::string::npos);
    CHECK_FALSE(parse_share(t).privacy.has_value());
  }
  SUBCASE("decimal strings restore exact bits") {
    for (double v : {0.1, 1.0 / 3, -2.5e-308, 1.7976931348623157e308, 4.9e-324}) {
      CHECK(parse_double_exact(format_double(v)) == v);
    }
  }
}

TEST_CASE("identical inputs give identical bytes") {
  const Fixture a(12);
  const Fixture b(12);
  CHECK(serialize_share(a.package) == serialize_share(b.package));
}

TEST_CASE("shared mixtures track per-class feature means") {
  const Fixture f(13);
  const Matrix feats = predict(f.model.encoder, f.source.features);
  const std::size_t d = feats.cols();
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t i = 0; i < feats.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += feats(i, j) / feats.rows();
  for (std::size_t i = 0; i < feats.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) sd[j] += std::pow(feats(i, j) - mean[j], 2) / feats.rows();
  for (double& s : sd) s = std::sqrt(s);
  Rng rng = substream(13, "resample");
  const auto s = sample_labeled(f.package.gmms, 40000, rng);
  for (int c = 0; c < 4; ++c) {
    std::vector<double> want(d, 0.0), got(d, 0.0);
    double nw = 0, ng = 0;
    for (std::size_t i = 0; i < feats.rows(); ++i) {
      if (f.source.labels[i] != c) continue;
      ++nw;
      for (std::size_t j = 0; j < d; ++j) want[j] += feats(i, j);
    }
    for (std::size_t i = 0; i < s.labels.size(); ++i) {
      if (s.labels[i] != c) continue;
      ++ng;
      for (std::size_t j = 0; j < d; ++j) got[j] += s.features(i, j);
    }
    for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(want[j] / nw - got[j] / ng) / sd[j] <= 0.1);
  }
}

TEST_CASE("adaptation") {
  const Fixture f(14, LabelMode::kMulticlass, true);
  const std::string before = serialize_share(f.package);
  const std::uint64_t ledger_digest = f.model.ledger.digest();
  AdaptConfig cfg;
  cfg.steps = 0;
  CHECK(adapt_target(f.package, f.target.features, cfg).encoder == f.package.encoder);
  cfg.steps = 20;
  cfg.learning_rate = 1e-3;
  for (auto method : {AdaptMethod::kCdan, AdaptMethod::kDann}) {
    cfg.method = method;
    const AdaptResult r = adapt_target(f.package, f.target.features, cfg);
    CHECK(r.log.size() == 20);
    CHECK(r.encoder != f.package.encoder);
    CHECK(r.warnings.empty());
    const AdaptResult again = adapt_target(f.package, f.target.features, cfg);
    CHECK(again.encoder == r.encoder);
  }
  cfg.static_pool = true;
  cfg.resample_count = 50;
  CHECK(adapt_target(f.package, f.target.features, cfg).log.size() == 20);
  CHECK(serialize_share(f.package) == before);
  CHECK(f.model.ledger.digest() == ledger_digest);
  CHECK_THROWS_AS(adapt_target(f.package, Matrix(3, 2), cfg), ConfigError);

  std::ostringstream log;
  write_adapt_log(log, {{1, {0.5, 0.25, 1, -1, 2}}});
  CHECK(log.str() == "step,kd,im_ent,im_div,disc,gen\n1,1,-1,2,0.5,0.25\n");
}

TEST_CASE("multilabel pipeline") {
  const Fixture f(15, LabelMode::kMultilabel);
  CHECK(f.package.meta.label_mode == LabelMode::kMultilabel);
  CHECK(parse_share(serialize_share(f.package)) == f.package);
  AdaptConfig cfg;
  cfg.steps = 5;
  const AdaptResult r = adapt_target(f.package, f.target.features, cfg);
  REQUIRE(r.warnings.size() == 1);
  const Metrics m = evaluate(r.encoder, f.package.classifier, f.target);
  CHECK(m.per_class.size() == 4);
}

TEST_CASE("evaluation and embeddings") {
  const Fixture f(16);
  CHECK_THROWS_AS(evaluate(f.package.encoder, f.package.classifier, Dataset{}), ConfigError);
  const Dataset one = f.target.subset(std::vector<std::size_t>{0});
  std::ostringstream out;
  export_embeddings(out, f.package.encoder, one, Projection::kPca2);
  CHECK(out.str() == "id,label,c0,c1\n0," + one.class_names[one.labels[0]] + ",0,0\n");
  std::ostringstream raw;
  export_embeddings(raw, f.package.encoder, f.target, Projection::kNone);
  std::string header;
  std::getline(std::istringstream(raw.str()) >> std::ws, header);
  CHECK(header == "id,label,c0,c1,c2,c3");
}

}  // TEST_SUITE
