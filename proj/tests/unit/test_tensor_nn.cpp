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
#include <vector>

#include "doctest.h"
#include "dpda/error.hpp"
#include "dpda/loss.hpp"
#include "dpda/mlp.hpp"
#include "helpers.hpp"

using namespace dpda;
using dpda::test::central_difference;
using dpda::test::random_matrix;

namespace {

MlpParams identity_layer(std::size_t n, Activation act) {
  const std::size_t dims[] = {n, n};
  const Activation acts[] = {act};
  MlpParams p(dims, acts);
  for (std::size_t i = 0; i < n; ++i) p.weight(0)[i * n + i] = 1.0;
  return p;
}

MlpParams random_net(std::vector<std::size_t> dims, std::vector<Activation> acts,
                     std::uint64_t seed) {
  Rng rng = substream(seed, "net");
  MlpParams p = MlpParams::initialized(dims, acts, rng);
  for (double& b : p.values()) b += 0.1 * standard_normal(rng);
  return p;
}

// Straight loop evaluation of y = act(x W + b) layer by layer.
Matrix reference_forward(const MlpParams& p, const Matrix& x) {
  Matrix h = x;
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    const auto& s = p.layer(l);
    Matrix next(h.rows(), s.out);
    for (std::size_t i = 0; i < h.rows(); ++i) {
      for (std::size_t o = 0; o < s.out; ++o) {
        double z = p.bias(l)[o];
        for (std::size_t k = 0; k < s.in; ++k) z += h(i, k) * p.weight(l)[k * s.out + o];
        if (s.activation == Activation::kRelu) z = z > 0 ? z : 0;
        if (s.activation == Activation::kSigmoid) z = 1 / (1 + std::exp(-z));
        next(i, o) = z;
      }
    }
    h = next;
  }
  return h;
}

}  // namespace

TEST_SUITE("tensor-nn") {

TEST_CASE("matrix construction checks sizes") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  Matrix m{{1, 2}, {3, 4}};
  CHECK(m.rows() == 2);
  CHECK(m(1, 0) == 3);
  CHECK(m.all_finite());
  m(0, 0) = NAN;
  CHECK_FALSE(m.all_finite());
  const std::size_t rows[] = {1, 1};
  const Matrix g = gather_rows(Matrix{{1, 2}, {3, 4}}, rows);
  CHECK(g == Matrix{{3, 4}, {3, 4}});
}

TEST_CASE("forward on identity and relu layers") {
  const MlpParams id = identity_layer(2, Activation::kIdentity);
  CHECK(predict(id, Matrix{{1, 2}}) == Matrix{{1, 2}});
  const MlpParams relu = identity_layer(2, Activation::kRelu);
  CHECK(predict(relu, Matrix{{-1, 3}}) == Matrix{{0, 3}});
  CHECK_THROWS_AS(predict(id, Matrix{{1, 2, 3}}), ShapeError);
}

TEST_CASE("forward matches a loop evaluator and is pure") {
  const MlpParams p = random_net({5, 7, 3}, {Activation::kRelu, Activation::kIdentity}, 3);
  Rng rng = substream(9, "x");
  const Matrix x = random_matrix(6, 5, rng);
  const Matrix a = predict(p, x);
  const Matrix b = reference_forward(p, x);
  REQUIRE(a.rows() == 6);
  REQUIRE(a.cols() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.values()[i] == doctest::Approx(b.values()[i]).epsilon(1e-13));
  }
  CHECK(predict(p, x) == a);
}

TEST_CASE("linear squared-error gradient equals 2(Wx - y) x^T") {
  const std::size_t dims[] = {3, 2};
  const Activation acts[] = {Activation::kIdentity};
  Rng rng = substream(1, "lin");
  MlpParams p = MlpParams::initialized(dims, acts, rng);
  const Matrix x{{0.5, -1.0, 2.0}};
  const Matrix y{{0.3, -0.7}};
  const Matrix out = predict(p, x);
  Matrix g(1, 2);
  for (std::size_t o = 0; o < 2; ++o) g(0, o) = 2.0 * (out(0, o) - y(0, o));
  const PerExampleGrads pe = backward_per_example(p, x, g);
  const auto grad = pe.example(0);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t o = 0; o < 2; ++o) {
      CHECK(grad[p.layer(0).weight_offset + k * 2 + o] ==
            doctest::Approx(2.0 * (out(0, o) - y(0, o)) * x(0, k)));
    }
  }
  for (std::size_t o = 0; o < 2; ++o) {
    CHECK(grad[p.layer(0).bias_offset + o] == doctest::Approx(g(0, o)));
  }
}

TEST_CASE("identical examples get identical gradients") {
  const MlpParams p = random_net({4, 6, 2}, {Activation::kRelu, Activation::kIdentity}, 5);
  const Matrix x{{0.1, 0.2, -0.3, 0.4}, {0.1, 0.2, -0.3, 0.4}};
  const Matrix g{{1.0, -2.0}, {1.0, -2.0}};
  const PerExampleGrads pe = backward_per_example(p, x, g);
  for (std::size_t j = 0; j < p.param_count(); ++j) {
    CHECK(pe.example(0)[j] == pe.example(1)[j]);
  }
}

TEST_CASE("per-example gradients match central differences") {
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    MlpParams p = random_net({4, 5, 3}, {Activation::kRelu, Activation::kIdentity}, 100 + trial);
    Rng rng = substream(trial, "fd");
    const Matrix x = random_matrix(3, 4, rng);
    const std::vector<int> y = dpda::test::random_labels(3, 3, rng);
    const ForwardCache cache = forward(p, x);
    const PerExampleLoss loss = softmax_cross_entropy(cache.outputs(), y);
    const PerExampleGrads pe = backward_per_example(p, cache, loss.grad);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const Matrix xi(1, 4, std::vector<double>(x.row(i).begin(), x.row(i).end()));
      const int yi[] = {y[i]};
      const auto f = [&] { return softmax_cross_entropy(predict(p, xi), yi).loss[0]; };
      for (std::size_t j = 0; j < p.param_count(); ++j) {
        const double fd = central_difference(f, p.values(), j);
        const double an = pe.example(i)[j];
        CHECK(std::abs(an - fd) / std::max(1.0, std::abs(an)) <= 1e-4);
      }
    }
  }
}

TEST_CASE("per-example gradients average to the batch gradient") {
  const MlpParams p = random_net({3, 8, 8, 2}, {Activation::kRelu, Activation::kRelu, Activation::kIdentity}, 8);
  Rng rng = substream(8, "batch");
  const Matrix x = random_matrix(10, 3, rng);
  const Matrix g = random_matrix(10, 2, rng);
  const ForwardCache cache = forward(p, x);
  const BackwardResult total = backward(p, cache, g);
  const PerExampleGrads pe = backward_per_example(p, cache, g);
  CHECK(pe.examples() == 10);
  for (std::size_t j = 0; j < p.param_count(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 10; ++i) sum += pe.example(i)[j];
    CHECK(std::abs(sum / 10.0 - total.grad[j] / 10.0) <= 1e-10);
  }
  CHECK_THROWS_AS(backward_per_example(p, cache, Matrix(10, 3)), ShapeError);
}

TEST_CASE("softmax rows") {
  const Matrix half = softmax_rows(Matrix{{0, 0}});
  CHECK(half(0, 0) == 0.5);
  CHECK(half(0, 1) == 0.5);
  const Matrix hot = softmax_rows(Matrix{{1, 5}}, 1e6);
  CHECK(hot(0, 0) == doctest::Approx(0.5).epsilon(1e-5));
  const Matrix p = softmax_rows(Matrix{{1, 2, 3}});
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int k = 0; k < 3; ++k) CHECK(p(0, k) == doctest::Approx(std::exp(k + 1.0) / z).epsilon(1e-14));
  Rng rng = substream(2, "softmax");
  Matrix big(50, 7);
  for (double& v : big.values()) v = std::uniform_real_distribution<double>(-50, 50)(rng);
  const Matrix q = softmax_rows(big);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    double s = 0.0;
    for (double v : q.row(i)) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
  CHECK_THROWS_AS(softmax_rows(Matrix{{INFINITY, 0}}), NumericError);
  CHECK_THROWS_AS(softmax_rows(Matrix{{0, 0}}, 0.0), ConfigError);
}

TEST_CASE("cross entropy") {
  CHECK(cross_entropy(Matrix{{1, 0}, {0, 1}}, Matrix{{1, 0}, {0, 1}}) == 0.0);
  CHECK(cross_entropy(Matrix{{0.5, 0.5}}, Matrix{{1, 0}}) == doctest::Approx(std::log(2.0)));
  CHECK(cross_entropy(Matrix{{0, 1}}, Matrix{{1, 0}}) == doctest::Approx(-std::log(kProbabilityFloor)));
  const Matrix p{{0.2, 0.3, 0.5}, {0.6, 0.1, 0.3}};
  const int y[] = {2, 1};
  const double oracle = -(std::log(0.5) + std::log(0.1)) / 2.0;
  CHECK(cross_entropy(p, one_hot(y, 3)) == doctest::Approx(oracle).epsilon(1e-14));
  CHECK_THROWS_AS(cross_entropy(p, Matrix(1, 3)), ShapeError);
}

TEST_CASE("adamw single scalar step matches the hand formula") {
  const std::size_t dims[] = {1, 1};
  const Activation acts[] = {Activation::kIdentity};
  MlpParams p(dims, acts);
  p.weight(0)[0] = 0.7;
  p.bias(0)[0] = -0.2;
  AdamWHyper h;
  h.learning_rate = 0.01;
  h.weight_decay = 0.1;
  AdamWState s = AdamWState::for_params(p, h);
  const double g[] = {0.3, -0.5};
  adamw_update(p, g, s);
  CHECK(s.step_count == 1);
  const auto expected = [&](double p0, double gi) {
    const double m = (1 - h.beta1) * gi, v = (1 - h.beta2) * gi * gi;
    const double mh = m / (1 - h.beta1), vh = v / (1 - h.beta2);
    return p0 * (1 - h.learning_rate * h.weight_decay) - h.learning_rate * mh / (std::sqrt(vh) + h.eps);
  };
  CHECK(p.weight(0)[0] == doctest::Approx(expected(0.7, 0.3)).epsilon(1e-15));
  CHECK(p.bias(0)[0] == doctest::Approx(expected(-0.2, -0.5)).epsilon(1e-15));
}

TEST_CASE("adamw zero gradient without decay leaves parameters; twins stay identical") {
  MlpParams a = random_net({3, 4, 2}, {Activation::kRelu, Activation::kIdentity}, 11);
  const MlpParams before = a;
  AdamWHyper h;
  h.weight_decay = 0.0;
  AdamWState s = AdamWState::for_params(a, h);
  const std::vector<double> zero(a.param_count(), 0.0);
  adamw_update(a, zero, s);
  CHECK(a == before);

  MlpParams b = before, c = before;
  AdamWState sb = AdamWState::for_params(b, {}), sc = AdamWState::for_params(c, {});
  Rng rng = substream(4, "seq");
  for (int t = 0; t < 20; ++t) {
    std::vector<double> g(b.param_count());
    for (double& v : g) v = standard_normal(rng);
    adamw_update(b, g, sb);
    adamw_update(c, g, sc);
  }
  CHECK(b == c);
}

TEST_CASE("adamw with trainable ranges freezes the rest") {
  MlpParams p = random_net({3, 4, 2}, {Activation::kRelu, Activation::kIdentity}, 12);
  const MlpParams before = p;
  AdamWState s = AdamWState::for_params(p, {});
  const std::vector<double> g(p.param_count(), 1.0);
  const ParamRange last[] = {p.layer_range(1)};
  adamw_update(p, g, s, last);
  for (std::size_t j = 0; j < p.param_count(); ++j) {
    if (j < last[0].begin) {
      CHECK(p.values()[j] == before.values()[j]);
      CHECK(s.first_moment[j] == 0.0);
    } else {
      CHECK(p.values()[j] != before.values()[j]);
    }
  }
}

TEST_CASE("slice and concat round trip") {
  const MlpParams p = random_net({3, 4, 5, 2}, {Activation::kRelu, Activation::kIdentity, Activation::kIdentity}, 13);
  const MlpParams enc = p.slice(0, 2), cls = p.slice(2, 3);
  CHECK(enc.output_dim() == 5);
  CHECK(cls.input_dim() == 5);
  CHECK(MlpParams::concat(enc, cls) == p);
  Rng rng = substream(1, "x");
  const Matrix x = random_matrix(4, 3, rng);
  CHECK(predict(cls, predict(enc, x)) == predict(p, x));
  CHECK_THROWS_AS(MlpParams::concat(cls, enc), ShapeError);
  CHECK_THROWS_AS(parse_activation("tanh"), ConfigError);
}

}  // TEST_SUITE
