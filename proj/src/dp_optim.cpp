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

#include "dpda/dp_optim.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "dpda/error.hpp"
#include "dpda/rng.hpp"
#include "dpda/simd.hpp"

namespace dpda {

double DpConfig::sampling_rate() const {
  return static_cast<double>(batch_size) / static_cast<double>(dataset_size);
}

void DpConfig::validate() const {
  if (!(clip_norm > 0.0)) throw ConfigError("dp.clip_norm must be > 0");
  if (!(noise_multiplier >= 0.0)) throw ConfigError("dp.noise_multiplier must be >= 0");
  if (batch_size == 0) throw ConfigError("dp.batch_size must be >= 1");
  if (accumulation_steps == 0) throw ConfigError("dp.accumulation_steps must be >= 1");
  if (dataset_size == 0) throw ConfigError("dp.dataset_size must be >= 1");
  if (batch_size > dataset_size) throw ConfigError("dp.batch_size exceeds dataset size");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("dp.delta must be in (0, 1)");
}

std::vector<bool> last_layers_private(const MlpParams& mlp, std::size_t n) {
  std::vector<bool> mask(mlp.layer_count(), false);
  for (std::size_t l = mlp.layer_count() > n ? mlp.layer_count() - n : 0;
       l < mlp.layer_count(); ++l) {
    mask[l] = true;
  }
  return mask;
}

std::vector<ParamRange> private_ranges(const MlpParams& mlp,
                                       const std::vector<bool>& mask) {
  if (!mask.empty() && mask.size() != mlp.layer_count()) {
    throw ConfigError("privacy mask has " + std::to_string(mask.size()) +
                      " entries for " + std::to_string(mlp.layer_count()) +
                      " layers");
  }
  std::vector<ParamRange> ranges;
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    if (!mask.empty() && !mask[l]) continue;
    const auto r = mlp.layer_range(l);
    if (!ranges.empty() && ranges.back().end == r.begin) {
      ranges.back().end = r.end;
    } else {
      ranges.push_back(r);
    }
  }
  if (ranges.empty()) throw ConfigError("privacy mask selects no layers");
  return ranges;
}

PerExampleGrads clip_per_example(PerExampleGrads grads, double clip_norm,
                                 std::span<const ParamRange> ranges) {
  if (!(clip_norm > 0.0)) throw ConfigError("clip norm must be > 0");
  const std::size_t width = grads.rows.cols();
  const ParamRange all{0, width};
  const auto use = ranges.empty() ? std::span<const ParamRange>(&all, 1) : ranges;
  for (std::size_t i = 0; i < grads.examples(); ++i) {
    auto g = grads.example(i);
    double sq = 0.0;
    for (const auto& r : use) sq += simd::sum_squares(g.subspan(r.begin, r.end - r.begin));
    const double norm = std::sqrt(sq);
    if (!ranges.empty()) {
      std::size_t cursor = 0;
      for (const auto& r : use) {
        std::fill(g.begin() + cursor, g.begin() + r.begin, 0.0);
        cursor = r.end;
      }
      std::fill(g.begin() + cursor, g.end(), 0.0);
    }
    if (norm > clip_norm) {
      const double factor = clip_norm / norm;
      for (const auto& r : use) simd::scale(factor, g.subspan(r.begin, r.end - r.begin));
    }
  }
  return grads;
}

NoisyGradient noise_and_average(const PerExampleGrads& clipped,
                                const DpConfig& config, std::uint64_t iteration,
                                std::span<const ParamRange> ranges) {
  const std::size_t width = clipped.rows.cols();
  NoisyGradient out;
  out.grad.assign(width, 0.0);
  for (std::size_t i = 0; i < clipped.examples(); ++i) {
    simd::axpy(1.0, clipped.example(i), out.grad);
  }
  if (config.noise_multiplier > 0.0) {
    const double sd = config.noise_multiplier * config.clip_norm;
    Rng rng = substream(config.seed, "dp-noise", iteration);
    const ParamRange all{0, width};
    const auto use = ranges.empty() ? std::span<const ParamRange>(&all, 1) : ranges;
    for (const auto& r : use) {
      for (std::size_t j = r.begin; j < r.end; ++j) {
        out.grad[j] += sd * standard_normal(rng);
      }
    }
  }
  const double b = static_cast<double>(config.batch_size);
  for (double& v : out.grad) v /= b;
  out.event = {config.sampling_rate(), config.noise_multiplier, 1};
  return out;
}

namespace {

std::vector<std::size_t> draw_batch(std::uint64_t seed, std::uint64_t iteration,
                                    std::size_t n, std::size_t batch) {
  Rng rng = substream(seed, "batch", iteration);
  return sample_without_replacement(n, batch, rng);
}

double cumulative_epsilon(const PrivacyLedger& ledger) {
  if (ledger.events.empty()) return 0.0;
  return to_eps_delta(compose(ledger), ledger.delta).epsilon;
}

}  // namespace

TrainResult dp_train(MlpParams params, const Matrix& data,
                     const BatchLossFn& loss, const DpConfig& config_in,
                     const AdamWHyper& optimizer, PrivacyLedger ledger) {
  if (data.rows() == 0) throw ConfigError("dp_train: empty training data");
  DpConfig config = config_in;
  if (config.dataset_size == 0) config.dataset_size = data.rows();
  if (config.dataset_size != data.rows()) {
    throw ConfigError("dp.dataset_size does not match the training data");
  }
  config.validate();
  ledger.delta = config.delta;
  ledger.sampling_scheme = kSchemeWithoutReplacement;
  const std::uint64_t events_before = ledger.total_count();

  const auto ranges = private_ranges(params, config.private_layers);
  AdamWState state = AdamWState::for_params(params, optimizer);
  TrainResult result;
  ParamVector accum(params.param_count(), 0.0);
  std::size_t pending = 0;
  double loss_sum = 0.0;
  std::size_t loss_rows = 0;

  const auto flush = [&] {
    adamw_update(params, accum, state, ranges);
    TrainLogRow row;
    row.step = state.step_count;
    row.loss = loss_sum / static_cast<double>(loss_rows);
    row.epsilon = cumulative_epsilon(ledger);
    result.log.push_back(row);
    std::fill(accum.begin(), accum.end(), 0.0);
    pending = 0;
    loss_sum = 0.0;
    loss_rows = 0;
  };

  for (std::uint64_t t = 0; t < config.total_iterations; ++t) {
    const auto rows = draw_batch(config.seed, t, data.rows(), config.batch_size);
    const Matrix batch = gather_rows(data, rows);
    const ForwardCache cache = forward(params, batch);
    const PerExampleLoss l = loss(cache.outputs(), rows);
    for (double v : l.loss) loss_sum += v;
    loss_rows += l.loss.size();

    auto per_example = backward_per_example(params, cache, l.grad);
    per_example = clip_per_example(std::move(per_example), config.clip_norm, ranges);
    const NoisyGradient noisy = noise_and_average(per_example, config, t, ranges);
    simd::axpy(1.0, noisy.grad, accum);
    ledger.record(noisy.event.q, noisy.event.sigma);
    ++result.batches_sampled;
    if (++pending == config.accumulation_steps) flush();
  }
  if (pending > 0) flush();

  if (ledger.total_count() - events_before != result.batches_sampled) {
    throw InternalError("privacy ledger event count does not match batches sampled");
  }
  result.params = std::move(params);
  result.ledger = std::move(ledger);
  return result;
}

TrainResult train_nonprivate(MlpParams params, const Matrix& data,
                             const BatchLossFn& loss, std::size_t batch_size,
                             std::uint64_t iterations, std::uint64_t seed,
                             const AdamWHyper& optimizer) {
  if (data.rows() == 0) throw ConfigError("training data is empty");
  if (batch_size == 0 || batch_size > data.rows()) {
    throw ConfigError("batch size must be in [1, rows]");
  }
  AdamWState state = AdamWState::for_params(params, optimizer);
  TrainResult result;
  for (std::uint64_t t = 0; t < iterations; ++t) {
    const auto rows = draw_batch(seed, t, data.rows(), batch_size);
    const Matrix batch = gather_rows(data, rows);
    const ForwardCache cache = forward(params, batch);
    const PerExampleLoss l = loss(cache.outputs(), rows);
    BackwardResult g = backward(params, cache, l.grad);
    const double b = static_cast<double>(batch_size);
    for (double& v : g.grad) v /= b;
    adamw_update(params, g.grad, state);
    ++result.batches_sampled;
    result.log.push_back({state.step_count, l.mean(), 0.0});
  }
  result.params = std::move(params);
  return result;
}

void write_train_log(std::ostream& out, const std::vector<TrainLogRow>& log) {
  out << "step,loss,epsilon\n";
  char buf[96];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g\n",
                  static_cast<unsigned long long>(r.step), r.loss, r.epsilon);
    out << buf;
  }
}

}  // namespace dpda
