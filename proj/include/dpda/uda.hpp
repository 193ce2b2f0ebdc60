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

#include "dpda/loss.hpp"
#include "dpda/mlp.hpp"
#include "dpda/rng.hpp"
#include "dpda/tensor.hpp"

// Target-side adaptation objectives: temperature-softened distillation from
// the frozen source model, information maximization on target predictions,
// and DANN / CDAN adversarial alignment against features resampled from the
// shared source mixtures.

namespace dpda {

enum class AdaptMethod { kDann, kCdan };
// CDAN discriminator input: flattened feature (x) prediction outer product,
// or the plain concatenation [feature, prediction].
enum class Conditioning { kOuterProduct, kConcat };

struct AdaptConfig {
  AdaptMethod method = AdaptMethod::kCdan;
  double temperature = 20.0;
  double lambda_kd = 1.0;
  double lambda_im = 1.0;
  double lambda_adv = 1.0;
  double learning_rate = 1e-5;  // encoder and discriminator
  double weight_decay = 0.01;
  std::size_t batch_size = 64;
  std::size_t steps = 1000;
  // Static-pool mode draws one pool of resample_count features up front and
  // cycles through it; otherwise a fresh batch is drawn every step.
  bool static_pool = false;
  std::size_t resample_count = 0;
  std::size_t discriminator_hidden = 64;
  Conditioning conditioning = Conditioning::kOuterProduct;
  std::uint64_t seed = 0;

  void validate() const;
};

// t^2 * mean_i sum_k -softmax(s_i / t)_k log softmax(z_i / t)_k with the
// source side s held fixed. grad (optional) receives d/dz.
double kd_loss(const Matrix& source_logits, const Matrix& target_logits,
               double temperature, Matrix* grad = nullptr);

// Multilabel counterpart: per-class binary cross-entropy between
// sigmoid(s / t) and sigmoid(z / t), scaled by t^2.
double kd_loss_binary(const Matrix& source_logits, const Matrix& target_logits,
                      double temperature, Matrix* grad = nullptr);

struct ImLoss {
  double ent = 0.0;  // mean per-row prediction entropy
  double div = 0.0;  // sum_k g_k log g_k of the batch-mean prediction g
  double total() const { return ent + div; }
};

ImLoss im_loss(const Matrix& target_logits, Matrix* grad = nullptr);

// Three dense layers: in -> hidden relu -> hidden relu -> 1 sigmoid.
MlpParams make_discriminator(std::size_t input_dim, std::size_t hidden, Rng& rng);

// -mean log D_source - mean log(1 - D_target) on discriminator outputs.
double discriminator_loss(const Matrix& d_source, const Matrix& d_target);

// Discriminator input for a feature batch and (detached) predictions.
Matrix condition(const Matrix& features, const Matrix& predictions,
                 Conditioning mode);
std::size_t conditioned_dim(std::size_t feature_dim, std::size_t classes,
                            Conditioning mode);

struct AdversarialModels {
  MlpParams& encoder;          // E_t, trained
  AdamWState& encoder_opt;
  MlpParams& discriminator;    // trained
  AdamWState& discriminator_opt;
  const MlpParams& classifier; // C_s, frozen
};

struct StepBatch {
  const Matrix& source_features;  // resampled z_s
  const Matrix& target_batch;     // x_t
  // C_s(E_s(x_t)) for the distillation term; may be null when lambda_kd = 0.
  const Matrix* teacher_logits = nullptr;
};

struct StepLosses {
  double disc = 0.0;
  double gen = 0.0;
  double kd = 0.0;
  double im_ent = 0.0;
  double im_div = 0.0;
};

// One alternation: a discriminator AdamW step with the encoder frozen, then
// an encoder AdamW step on lambda_adv * gen + lambda_kd * kd +
// lambda_im * im with the discriminator frozen. The generator term is the
// non-saturating -mean log D(E_t(x_t)). When all three weights are zero the
// encoder step is skipped.
StepLosses dann_step(AdversarialModels& models, const StepBatch& batch,
                     const AdaptConfig& config,
                     LabelMode mode = LabelMode::kMulticlass);

// As dann_step, but the discriminator sees condition(feature, prediction):
// (z_s, C_s(z_s)) on the source side and (E_t(x_t), C_s(E_t(x_t))) on the
// target side. Predictions are treated as constants.
StepLosses cdan_step(AdversarialModels& models, const StepBatch& batch,
                     const AdaptConfig& config,
                     LabelMode mode = LabelMode::kMulticlass);

}  // namespace dpda
