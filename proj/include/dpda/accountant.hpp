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
#include <span>
#include <string>
#include <vector>

// Renyi-DP accounting for DP-SGD.
//
// A mechanism M is (epsilon, delta)-DP when for all adjacent datasets d, d'
// (differing in one record) and all output sets S,
//   Pr[M(d) in S] <= e^epsilon Pr[M(d') in S] + delta.
// Each noisy gradient step is a subsampled Gaussian mechanism; its Renyi
// divergence at order alpha composes additively over steps, and the total
// converts to (epsilon, delta) by minimizing over orders.

namespace dpda {

inline constexpr const char* kSchemeWithoutReplacement =
    "uniform-without-replacement";
inline constexpr const char* kSchemePoisson = "poisson";
inline constexpr const char* kSamplingNote =
    "batches drawn uniformly without replacement; bound computed for "
    "Poisson subsampling at q = batch_size / dataset_size";

struct PrivacyEvent {
  double q = 1.0;      // sampling rate, (0, 1]
  double sigma = 0.0;  // noise multiplier
  std::uint64_t count = 1;
  friend bool operator==(const PrivacyEvent&, const PrivacyEvent&) = default;
};

struct PrivacyLedger {
  std::vector<PrivacyEvent> events;
  double delta = 1e-5;
  std::string sampling_scheme = kSchemeWithoutReplacement;

  // Appends, merging with the previous event when (q, sigma) match.
  void record(double q, double sigma, std::uint64_t count = 1);
  std::uint64_t total_count() const;
  // Stable fingerprint of the full contents.
  std::uint64_t digest() const;

  friend bool operator==(const PrivacyLedger&, const PrivacyLedger&) = default;
};

struct RdpCurve {
  std::vector<double> orders;
  std::vector<double> values;
};

struct EpsDelta {
  double epsilon = 0.0;
  double delta = 0.0;
  double optimal_order = 0.0;
};

// {2, 3, ..., 64, 128, 256}
std::vector<double> default_orders();

// alpha / (2 sigma^2); +inf when sigma == 0.
double gaussian_rdp(double sigma, double alpha);

// RDP at integer order alpha >= 2 of the Gaussian mechanism applied to a
// Poisson subsample with rate q:
//   A = sum_k C(alpha, k) (1-q)^(alpha-k) q^k exp((k^2 - k) / (2 sigma^2))
//   rdp = log(A) / (alpha - 1)
// evaluated as A - 1 = sum_{k>=2} ... expm1(...) in log space so small-q
// values keep full relative precision.
double subsampled_gaussian_rdp(double q, double sigma, int alpha);

// Count-weighted sum of per-event RDP at each order.
RdpCurve compose(const PrivacyLedger& ledger, std::span<const double> orders);
RdpCurve compose(const PrivacyLedger& ledger);

// epsilon = min_alpha rdp(alpha) + log(1/delta) / (alpha - 1).
EpsDelta to_eps_delta(const RdpCurve& curve, double delta);

// Right-hand side of the moments-accountant sufficient condition
//   sigma >= c2 q sqrt(T log(1/delta)) / epsilon.
// The constants are not given in closed form; kDefaultC2 is the smallest
// value in 0.05 steps for which the RDP accountant certifies the target
// epsilon at that sigma over the calibration grid in the tests.
inline constexpr double kDefaultC2 = 1.75;
inline constexpr double kDefaultC1 = 1.0;
double sufficient_sigma(double q, std::uint64_t steps, double epsilon,
                        double delta, double c2 = kDefaultC2);
// The bound only applies for epsilon < c1 q^2 T.
bool sufficient_sigma_applies(double q, std::uint64_t steps, double epsilon,
                              double c1 = kDefaultC1);

// Epsilon after `steps` identical events.
EpsDelta epsilon_for(double q, double sigma, std::uint64_t steps, double delta,
                     std::span<const double> orders);

// Smallest sigma (to relative precision 1e-6) whose accountant epsilon is at
// most target_epsilon.
double calibrate_sigma(double q, std::uint64_t steps, double target_epsilon,
                       double delta, std::span<const double> orders);

// Machine-readable privacy report with keys
// {epsilon, delta, order, q, sigma, steps, scheme}.
struct PrivacyReport {
  EpsDelta eps;
  double q = 0.0;
  double sigma = 0.0;
  std::uint64_t steps = 0;
  std::string scheme;
  std::string to_json() const;
};

}  // namespace dpda
