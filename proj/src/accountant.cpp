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

#include "dpda/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <utility>

#include "dpda/error.hpp"
#include "json.hpp"

namespace dpda {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// log(e^x - 1) for x > 0.
double log_expm1(double x) {
  return x > 40.0 ? x + std::log1p(-std::exp(-x)) : std::log(std::expm1(x));
}

double log_sum_exp(const std::vector<double>& terms) {
  double max = -kInf;
  for (double t : terms) max = std::max(max, t);
  if (max == -kInf) return -kInf;
  double total = 0.0;
  for (double t : terms) total += std::exp(t - max);
  return max + std::log(total);
}

// log(1 + e^x)
double softplus(double x) {
  return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

bool is_integer(double a) { return std::floor(a) == a; }

double event_rdp(const PrivacyEvent& e, double alpha) {
  if (e.q >= 1.0) return gaussian_rdp(e.sigma, alpha);
  if (e.sigma == 0.0) return kInf;
  if (!is_integer(alpha)) {
    throw ConfigError("subsampled RDP is only defined here at integer orders");
  }
  return subsampled_gaussian_rdp(e.q, e.sigma, static_cast<int>(alpha));
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void PrivacyLedger::record(double q, double sigma, std::uint64_t count) {
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("sampling rate must be in (0, 1]");
  if (!(sigma >= 0.0)) throw ConfigError("noise multiplier must be >= 0");
  if (count == 0) throw ConfigError("event count must be >= 1");
  if (!events.empty() && events.back().q == q && events.back().sigma == sigma) {
    events.back().count += count;
  } else {
    events.push_back({q, sigma, count});
  }
}

std::uint64_t PrivacyLedger::total_count() const {
  std::uint64_t n = 0;
  for (const auto& e : events) n += e.count;
  return n;
}

std::uint64_t PrivacyLedger::digest() const {
  std::string text = sampling_scheme + "|" + fmt17(delta);
  for (const auto& e : events) {
    text += "|" + fmt17(e.q) + "," + fmt17(e.sigma) + "," + std::to_string(e.count);
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> default_orders() {
  std::vector<double> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  orders.push_back(128);
  orders.push_back(256);
  return orders;
}

double gaussian_rdp(double sigma, double alpha) {
  if (!(alpha > 1.0)) throw ConfigError("RDP order must be > 1");
  if (sigma < 0.0) throw ConfigError("noise multiplier must be >= 0");
  if (sigma == 0.0) return kInf;
  return alpha / (2.0 * sigma * sigma);
}

double subsampled_gaussian_rdp(double q, double sigma, int alpha) {
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("sampling rate must be in (0, 1]");
  if (!(sigma > 0.0)) throw ConfigError("noise multiplier must be > 0");
  if (alpha < 2) throw ConfigError("order must be an integer >= 2");
  if (q == 1.0) return gaussian_rdp(sigma, alpha);

  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(alpha));
  for (int k = 2; k <= alpha; ++k) {
    const double exponent = static_cast<double>(k) * (k - 1) * inv_two_var;
    terms.push_back(log_binomial(alpha, k) + (alpha - k) * log_1mq + k * log_q +
                    log_expm1(exponent));
  }
  const double log_a_minus_1 = log_sum_exp(terms);
  if (log_a_minus_1 == -kInf) return 0.0;
  return softplus(log_a_minus_1) / (alpha - 1.0);
}

RdpCurve compose(const PrivacyLedger& ledger, std::span<const double> orders) {
  RdpCurve curve;
  curve.orders.assign(orders.begin(), orders.end());
  curve.values.assign(orders.size(), 0.0);
  // Distinct (q, sigma) pairs are evaluated once.
  std::map<std::pair<double, double>, std::uint64_t> counts;
  for (const auto& e : ledger.events) counts[{e.q, e.sigma}] += e.count;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (!(orders[i] > 1.0)) throw ConfigError("RDP orders must be > 1");
    for (const auto& [key, count] : counts) {
      const PrivacyEvent e{key.first, key.second, count};
      curve.values[i] += static_cast<double>(count) * event_rdp(e, orders[i]);
    }
  }
  return curve;
}

RdpCurve compose(const PrivacyLedger& ledger) {
  const auto orders = default_orders();
  return compose(ledger, orders);
}

EpsDelta to_eps_delta(const RdpCurve& curve, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0, 1)");
  if (curve.orders.empty() || curve.orders.size() != curve.values.size()) {
    throw ConfigError("empty or malformed RDP curve");
  }
  EpsDelta best{kInf, delta, curve.orders.front()};
  const double log_inv_delta = std::log(1.0 / delta);
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    const double eps =
        curve.values[i] + log_inv_delta / (curve.orders[i] - 1.0);
    if (eps < best.epsilon) {
      best.epsilon = eps;
      best.optimal_order = curve.orders[i];
    }
  }
  return best;
}

double sufficient_sigma(double q, std::uint64_t steps, double epsilon,
                        double delta, double c2) {
  if (!(q > 0.0) || steps == 0 || !(epsilon > 0.0) || !(delta > 0.0) ||
      !(c2 > 0.0)) {
    throw ConfigError("sufficient_sigma: all arguments must be positive");
  }
  return c2 * q * std::sqrt(static_cast<double>(steps) * std::log(1.0 / delta)) /
         epsilon;
}

bool sufficient_sigma_applies(double q, std::uint64_t steps, double epsilon,
                              double c1) {
  return epsilon < c1 * q * q * static_cast<double>(steps);
}

EpsDelta epsilon_for(double q, double sigma, std::uint64_t steps, double delta,
                     std::span<const double> orders) {
  PrivacyLedger ledger;
  ledger.delta = delta;
  if (steps > 0) ledger.record(q, sigma, steps);
  return to_eps_delta(compose(ledger, orders), delta);
}

double calibrate_sigma(double q, std::uint64_t steps, double target_epsilon,
                       double delta, std::span<const double> orders) {
  if (!(target_epsilon > 0.0)) throw ConfigError("target epsilon must be > 0");
  if (steps == 0) return 0.0;
  const auto eps_at = [&](double s) {
    return epsilon_for(q, s, steps, delta, orders).epsilon;
  };
  double hi = 1.0;
  while (eps_at(hi) > target_epsilon) {
    hi *= 2.0;
    if (hi > 1e6) throw ConfigError("target epsilon unreachable");
  }
  double lo = hi / 2.0;
  while (lo > 1e-3 && eps_at(lo) <= target_epsilon) {
    hi = lo;
    lo /= 2.0;
  }
  while ((hi - lo) > 1e-6 * hi) {
    const double mid = 0.5 * (lo + hi);
    (eps_at(mid) <= target_epsilon ? hi : lo) = mid;
  }
  return hi;
}

std::string PrivacyReport::to_json() const {
  nlohmann::ordered_json j;
  j["epsilon"] = eps.epsilon;
  j["delta"] = eps.delta;
  j["order"] = eps.optimal_order;
  j["q"] = q;
  j["sigma"] = sigma;
  j["steps"] = steps;
  j["scheme"] = scheme;
  return j.dump(2);
}

}  // namespace dpda
