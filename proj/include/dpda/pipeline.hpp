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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dpda/accountant.hpp"
#include "dpda/data.hpp"
#include "dpda/dp_optim.hpp"
#include "dpda/gmm.hpp"
#include "dpda/metrics.hpp"
#include "dpda/mlp.hpp"
#include "dpda/share.hpp"
#include "dpda/uda.hpp"

namespace dpda {

// Encoder: input -> hidden... (relu) -> feature_dim (identity).
// Classifier: one linear layer feature_dim -> classes.
struct ModelSpec {
  std::vector<std::size_t> encoder_hidden = {64, 32};
  std::size_t feature_dim = 16;
};

struct PretrainConfig {
  ModelSpec model;
  double learning_rate = 5e-5;
  double weight_decay = 0.01;
  std::size_t batch_size = 64;
  std::uint64_t steps = 2000;  // sampled batches (T)
  std::uint64_t seed = 0;

  bool dp = false;
  // With dp set: target_epsilon > 0 picks sigma by accountant search;
  // otherwise noise_multiplier is used as given.
  double target_epsilon = 1.0;
  double noise_multiplier = 1.0;
  double clip_norm = 1.0;
  std::size_t accumulation_steps = 1;
  double delta = 1e-5;
  // 0 means every layer is private; n > 0 trains only the last n layers of
  // the encoder + classifier stack (the rest stay at initialization).
  std::size_t private_last_layers = 0;

  void validate() const;
};

struct Pretrained {
  MlpParams encoder;
  MlpParams classifier;
  PrivacyLedger ledger;
  std::optional<PrivacyReceipt> receipt;  // set iff DP training ran
  std::vector<TrainLogRow> log;
  LabelMode mode = LabelMode::kMulticlass;
  std::vector<std::string> class_names;
};

Pretrained pretrain_source(const Dataset& source, const PretrainConfig& config);

PrivacyReceipt receipt_from_ledger(const PrivacyLedger& ledger);

struct ShareConfig {
  std::size_t k = 6;
  double tol = 1e-6;
  std::size_t max_iter = 200;
  bool pooled = false;
  std::uint64_t seed = 0;
  std::string config_digest;
};

struct ShareBuild {
  SharePackage package;
  std::vector<std::string> notes;  // K reductions and component re-seeds
};

// Fits per-class mixtures on E_s(X_s). In multilabel mode a row contributes
// to the mixture of every class it is positive for. The ledger is not
// touched.
ShareBuild build_share(const Pretrained& model, const Dataset& source,
                       const ShareConfig& config);

struct AdaptLogRow {
  std::size_t step = 0;
  StepLosses losses;
};

struct AdaptResult {
  MlpParams encoder;
  std::vector<AdaptLogRow> log;
  std::vector<std::string> warnings;
};

// Initializes E_t from the package encoder and runs config.steps alternating
// discriminator / encoder updates against features resampled from the
// package mixtures. Only E_t and the discriminator change.
AdaptResult adapt_target(const SharePackage& pkg, const Matrix& target_features,
                         const AdaptConfig& config);

// step,kd,im_ent,im_div,disc,gen
void write_adapt_log(std::ostream& out, const std::vector<AdaptLogRow>& log);

// Multiclass: argmax; multilabel: sigmoid(logit) >= 0.5 per class.
Metrics evaluate(const MlpParams& encoder, const MlpParams& classifier,
                 const Dataset& data);

enum class Projection { kNone, kPca2 };

// id,label,<coords...>; the label column holds the class name (multiclass)
// or the '|'-joined positive class names (multilabel).
void export_embeddings(std::ostream& out, const MlpParams& encoder,
                       const Dataset& data, Projection projection);

}  // namespace dpda
