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
#include <span>
#include <string>
#include <vector>

#include "dpda/data.hpp"
#include "dpda/gmm.hpp"
#include "dpda/mlp.hpp"
#include "dpda/pipeline.hpp"
#include "dpda/share.hpp"

// Threshold membership-inference attacks. Every attack reduces to a score
// per candidate (higher means "member"); the report sweeps all thresholds.

namespace dpda {

struct RocPoint {
  double threshold = 0.0;  // predict member when score >= threshold
  double tpr = 0.0;
  double fpr = 0.0;
};

struct ScoreSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct AttackReport {
  std::string attack;
  double auc = 0.5;
  std::vector<RocPoint> sweep;  // from (0, 0) to (1, 1), fpr and tpr non-decreasing
  ScoreSummary member;
  ScoreSummary nonmember;
};

// Full sweep over the distinct scores; AUC by the trapezoid rule, so tied
// member/non-member scores count one half.
AttackReport attack_from_scores(std::string name, std::span<const double> member,
                                std::span<const double> nonmember);

// Negative per-example loss of classifier(encoder(x)) against the labels.
std::vector<double> confidence_scores(const MlpParams& encoder,
                                      const MlpParams& classifier,
                                      const Dataset& data);

AttackReport confidence_attack(const MlpParams& encoder, const MlpParams& classifier,
                               const Dataset& members, const Dataset& nonmembers);

// log p_with(x | c) - log p_without(x | c). Pooled sets ignore c.
double gmm_shift_attack(const ClassConditionalGmms& without,
                        const ClassConditionalGmms& with,
                        std::span<const double> candidate_feature, int candidate_class);

// Scores every member and non-member (through `encoder`) with
// gmm_shift_attack. Multilabel candidates use their first positive class.
AttackReport gmm_shift_report(const MlpParams& encoder,
                              const ClassConditionalGmms& without,
                              const ClassConditionalGmms& with,
                              const Dataset& members, const Dataset& nonmembers);

// One attacked release: the shared package (its gmms are the "with" set)
// plus the populations. `reference` is disjoint from the members and stands
// in for the release made before the members joined; its mixtures are fit
// through the package encoder with `fit`.
struct PrivacySetting {
  std::string label;
  const SharePackage* package = nullptr;
  const Dataset* members = nullptr;
  const Dataset* nonmembers = nullptr;
  const Dataset* reference = nullptr;
  ClassFitOptions fit;
  std::uint64_t seed = 0;
};

struct AttackRow {
  std::string setting;
  AttackReport report;
  std::uint64_t seed = 0;
};

// Runs the confidence attack and the mixture-shift attack against every
// setting, in order.
std::vector<AttackRow> compare_privacy(std::span<const PrivacySetting> settings);

// Membership experiment sizes and the deliberately overfitting source
// training run attacked in each setting.
struct AttackConfig {
  std::size_t members_per_class = 25;
  std::size_t nonmembers_per_class = 25;
  std::size_t reference_per_class = 25;
  std::uint64_t steps = 3000;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::vector<double> epsilons;  // inf means non-private
};

// Draws disjoint member / non-member / reference populations from the
// source distribution of `data`, trains one source model per entry of
// attack.epsilons on the members only (non-private for inf, DP at that
// epsilon otherwise; model shape, clipping and delta from `base`), shares
// it with `share`, and attacks every release. Settings are labelled
// "eps=<value>".
std::vector<AttackRow> membership_experiment(const DomainSpec& data,
                                             const AttackConfig& attack,
                                             const PretrainConfig& base,
                                             const ShareConfig& share,
                                             std::uint64_t seed);

// setting,attack,auc,n_member,n_nonmember,seed
void write_attack_csv(std::ostream& out, std::span<const AttackRow> rows);

}  // namespace dpda
