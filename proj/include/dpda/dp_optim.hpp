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
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "dpda/accountant.hpp"
#include "dpda/loss.hpp"
#include "dpda/mlp.hpp"

namespace dpda {

struct DpConfig {
  double clip_norm = 1.0;          // C
  double noise_multiplier = 1.0;   // sigma
  std::size_t batch_size = 64;
  std::size_t accumulation_steps = 1;  // L micro-batches per optimizer step
  std::size_t dataset_size = 0;        // N; 0 means "use the data's rows"
  std::uint64_t total_iterations = 0;  // T sampled micro-batches
  double delta = 1e-5;
  std::uint64_t seed = 0;
  // One flag per layer; empty means every layer is private. Layers that are
  // not private are frozen during DP training.
  std::vector<bool> private_layers;

  // batch_size / dataset_size
  double sampling_rate() const;
  // Throws ConfigError.
  void validate() const;
};

// Mask that marks only the last `n` layers private.
std::vector<bool> last_layers_private(const MlpParams& mlp, std::size_t n);

// Parameter slices of the private layers (all layers when mask is empty).
std::vector<ParamRange> private_ranges(const MlpParams& mlp,
                                       const std::vector<bool>& mask);

struct NoisyGradient {
  ParamVector grad;
  PrivacyEvent event;
};

// Scales each example by min(1, C / ||g_i||) where the norm runs over the
// given ranges (all parameters when empty). Entries outside the ranges are
// zeroed. Examples already within the bound are left untouched.
PerExampleGrads clip_per_example(PerExampleGrads grads, double clip_norm,
                                 std::span<const ParamRange> ranges = {});

// (sum_i g_i + n) / batch_size with n ~ N(0, sigma^2 C^2) i.i.d. on the
// private ranges, drawn from the ("dp-noise", iteration) substream of
// config.seed.
NoisyGradient noise_and_average(const PerExampleGrads& clipped,
                                const DpConfig& config, std::uint64_t iteration,
                                std::span<const ParamRange> ranges = {});

// Per-example loss on a batch: receives network outputs and the dataset
// rows they came from.
using BatchLossFn = std::function<PerExampleLoss(
    const Matrix& outputs, std::span<const std::size_t> rows)>;

struct TrainLogRow {
  std::uint64_t step = 0;  // optimizer step, 1-based
  double loss = 0.0;       // mean per-example loss over the step's batches
  double epsilon = 0.0;    // cumulative, at the ledger's delta
};

struct TrainResult {
  MlpParams params;
  PrivacyLedger ledger;
  std::vector<TrainLogRow> log;
  std::uint64_t batches_sampled = 0;
};

// DP-SGD: per iteration sample a batch uniformly without replacement
// ("batch" substream), compute per-example gradients, clip, noise and
// average; sum L such gradients and apply one AdamW step. One privacy event
// per sampled batch. A trailing partial accumulation is applied at the end.
TrainResult dp_train(MlpParams params, const Matrix& data,
                     const BatchLossFn& loss, const DpConfig& config,
                     const AdamWHyper& optimizer, PrivacyLedger ledger = {});

// Same batch sequence and update rule without clipping or noise; the
// reference trajectory for dp_train in the sigma = 0 limit.
TrainResult train_nonprivate(MlpParams params, const Matrix& data,
                             const BatchLossFn& loss, std::size_t batch_size,
                             std::uint64_t iterations, std::uint64_t seed,
                             const AdamWHyper& optimizer);

// CSV: step,loss,epsilon
void write_train_log(std::ostream& out, const std::vector<TrainLogRow>& log);

}  // namespace dpda
