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
#include <vector>

#include "doctest.h"
#include "dpda/error.hpp"
#include "dpda/mia.hpp"
#include "helpers.hpp"

using namespace dpda;

namespace {

std::vector<double> normals(std::size_t n, double shift, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = shift + standard_normal(rng);
  return v;
}

ClassConditionalGmms fit(const Matrix& x, std::uint64_t seed) {
  ClassFitOptions opt;
  opt.k_per_class = 2;
  opt.seed = seed;
  const std::vector<int> labels(x.rows(), 0);
  return fit_class_conditional(x, labels, 1, opt).gmms;
}

}  // namespace

TEST_SUITE("mia-harness") {

TEST_CASE("null case is near one half") {
  Rng rng = substream(1, "null");
  const auto m = normals(1000, 0.0, rng);
  const auto n = normals(1000, 0.0, rng);
  const AttackReport r = attack_from_scores("null", m, n);
  CHECK(std::abs(r.auc - 0.5) <= 0.05);
}

TEST_CASE("separated scores give auc one") {
  const std::vector<double> m = {5, 6, 7};
  const std::vector<double> n = {1, 2, 3, 4};
  const AttackReport r = attack_from_scores("sep", m, n);
  CHECK(r.auc == 1.0);
  CHECK(attack_from_scores("rev", n, m).auc == 0.0);
  CHECK(r.member.n == 3);
  CHECK(r.member.mean == 6.0);
  CHECK(r.nonmember.max == 4.0);
}

TEST_CASE("ties count one half") {
  const std::vector<double> all = {1, 1, 1};
  CHECK(attack_from_scores("tie", all, all).auc == 0.5);
}

TEST_CASE("roc sweep is monotone and auc matches pair counting") {
  Rng rng = substream(2, "roc");
  for (int trial = 0; trial < 20; ++trial) {
    auto m = normals(50 + trial, 0.3, rng);
    auto n = normals(60, 0.0, rng);
    for (double& v : m) v = std::round(v * 4) / 4;  // force ties
    for (double& v : n) v = std::round(v * 4) / 4;
    const AttackReport r = attack_from_scores("x", m, n);
    CHECK(r.sweep.front().tpr == 0.0);
    CHECK(r.sweep.front().fpr == 0.0);
    CHECK(r.sweep.back().tpr == 1.0);
    CHECK(r.sweep.back().fpr == 1.0);
    for (std::size_t i = 1; i < r.sweep.size(); ++i) {
      CHECK(r.sweep[i].tpr >= r.sweep[i - 1].tpr);
      CHECK(r.sweep[i].fpr >= r.sweep[i - 1].fpr);
    }
    double pairs = 0.0;
    for (double a : m) {
      for (double b : n) pairs += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    }
    CHECK(r.auc == doctest::Approx(pairs / (m.size() * n.size())).epsilon(1e-12));

    std::vector<double> nm(m), nn(n);
    for (double& v : nm) v = -v;
    for (double& v : nn) v = -v;
    CHECK(r.auc + attack_from_scores("neg", nm, nn).auc == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("attack errors") {
  const std::vector<double> some = {1.0};
  const std::vector<double> none;
  CHECK_THROWS_AS(attack_from_scores("e", none, some), ConfigError);
  CHECK_THROWS_AS(attack_from_scores("e", some, none), ConfigError);
  const std::vector<double> nan = {std::nan("")};
  CHECK_THROWS_AS(attack_from_scores("e", nan, some), NumericError);
}

TEST_CASE("mixture shift attack") {
  Rng rng = substream(3, "shift");
  const Matrix base = dpda::test::random_matrix(200, 2, rng);
  const ClassConditionalGmms g = fit(base, 1);
  const double cand[] = {2.5, -2.0};

  CHECK(gmm_shift_attack(g, g, cand, 0) == 0.0);

  Matrix with(base.rows() + 40, 2);
  for (std::size_t i = 0; i < base.rows(); ++i) {
    with(i, 0) = base(i, 0);
    with(i, 1) = base(i, 1);
  }
  for (std::size_t i = base.rows(); i < with.rows(); ++i) {
    with(i, 0) = cand[0];
    with(i, 1) = cand[1];
  }
  const ClassConditionalGmms h = fit(with, 1);
  const double s = gmm_shift_attack(g, h, cand, 0);
  CHECK(s > 0.0);
  CHECK(gmm_shift_attack(h, g, cand, 0) == -s);
  CHECK_THROWS_AS(gmm_shift_attack(g, h, cand, 3), ConfigError);
  const double short_cand[] = {1.0};
  CHECK_THROWS_AS(gmm_shift_attack(g, h, short_cand, 0), ShapeError);
}

TEST_CASE("compare privacy rows and csv") {
  DomainSpec spec;
  spec.dim = 4;
  spec.seed = 4;
  const Dataset members = generate_source_like(spec, 10, "members");
  const Dataset nonmembers = generate_source_like(spec, 10, "nonmembers");
  const Dataset reference = generate_source_like(spec, 10, "reference");
  PretrainConfig pc;
  pc.model.encoder_hidden = {8};
  pc.model.feature_dim = 3;
  pc.steps = 50;
  pc.learning_rate = 1e-2;
  pc.batch_size = 8;
  const Pretrained model = pretrain_source(members, pc);
  ShareConfig sc;
  sc.k = 2;
  const SharePackage pkg = build_share(model, members, sc).package;
  ClassFitOptions fo;
  fo.k_per_class = 2;
  const PrivacySetting s{"eps=inf", &pkg, &members, &nonmembers, &reference, fo, 7};
  const std::vector<PrivacySetting> twice = {s, s};
  const auto rows = compare_privacy(twice);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].report.attack == "confidence");
  CHECK(rows[1].report.attack == "gmm-shift");
  CHECK(rows[0].report.auc == rows[2].report.auc);
  CHECK(rows[1].report.auc == rows[3].report.auc);

  std::ostringstream csv;
  write_attack_csv(csv, rows);
  std::istringstream lines(csv.str());
  std::string header, a, b, c, d;
  std::getline(lines, header);
  std::getline(lines, a);
  std::getline(lines, b);
  std::getline(lines, c);
  std::getline(lines, d);
  CHECK(header == "setting,attack,auc,n_member,n_nonmember,seed");
  CHECK(a == c);
  CHECK(b == d);
  CHECK(a.rfind("eps=inf,confidence,", 0) == 0);
  CHECK(a.substr(a.size() - 8) == ",40,40,7");

  std::ostringstream empty;
  write_attack_csv(empty, {});
  CHECK(empty.str() == "setting,attack,auc,n_member,n_nonmember,seed\n");

  PrivacySetting incomplete = s;
  incomplete.reference = nullptr;
  const std::vector<PrivacySetting> bad = {incomplete};
  CHECK_THROWS_AS(compare_privacy(bad), ConfigError);
}

}  // TEST_SUITE
