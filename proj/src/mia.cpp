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

#include "dpda/mia.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "dpda/error.hpp"
#include "dpda/loss.hpp"
#include "dpda/rng.hpp"

namespace dpda {

namespace {

ScoreSummary summarize(std::span<const double> s) {
  ScoreSummary out;
  out.n = s.size();
  if (s.empty()) return out;
  double sum = 0.0;
  for (double v : s) sum += v;
  out.mean = sum / static_cast<double>(s.size());
  double ss = 0.0;
  for (double v : s) ss += (v - out.mean) * (v - out.mean);
  out.stddev = s.size() > 1 ? std::sqrt(ss / static_cast<double>(s.size() - 1)) : 0.0;
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  out.min = *lo;
  out.max = *hi;
  return out;
}

const GmmModel& class_model(const ClassConditionalGmms& g, int cls) {
  if (g.pooled()) return g.by_class.at(kPooledClass);
  const auto it = g.by_class.find(cls);
  if (it == g.by_class.end()) {
    throw ConfigError("no mixture for class " + std::to_string(cls));
  }
  return it->second;
}

int candidate_class(const Dataset& d, std::size_t i) {
  if (d.mode == LabelMode::kMulticlass) return d.labels[i];
  for (std::size_t c = 0; c < d.classes(); ++c) {
    if (d.label_matrix(i, c) != 0.0) return static_cast<int>(c);
  }
  return kPooledClass;
}

}  // namespace

AttackReport attack_from_scores(std::string name, std::span<const double> member,
                                std::span<const double> nonmember) {
  if (member.empty() || nonmember.empty()) {
    throw ConfigError("attack needs non-empty member and non-member sets");
  }
  for (double v : member) {
    if (std::isnan(v)) throw NumericError("NaN member score");
  }
  for (double v : nonmember) {
    if (std::isnan(v)) throw NumericError("NaN non-member score");
  }
  std::vector<std::pair<double, bool>> all;
  all.reserve(member.size() + nonmember.size());
  for (double v : member) all.emplace_back(v, true);
  for (double v : nonmember) all.emplace_back(v, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  AttackReport r;
  r.attack = std::move(name);
  r.member = summarize(member);
  r.nonmember = summarize(nonmember);
  const double np = static_cast<double>(member.size());
  const double nn = static_cast<double>(nonmember.size());
  r.sweep.push_back({all.front().first + 1.0, 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  double auc = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    const double t = all[i].first;
    for (; i < all.size() && all[i].first == t; ++i) (all[i].second ? tp : fp)++;
    const RocPoint p{t, static_cast<double>(tp) / np, static_cast<double>(fp) / nn};
    const RocPoint& prev = r.sweep.back();
    auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
    r.sweep.push_back(p);
  }
  r.auc = std::clamp(auc, 0.0, 1.0);
  return r;
}

std::vector<double> confidence_scores(const MlpParams& encoder,
                                      const MlpParams& classifier,
                                      const Dataset& data) {
  data.validate();
  const Matrix logits = predict(classifier, predict(encoder, data.features));
  const PerExampleLoss l = data.mode == LabelMode::kMulticlass
                               ? softmax_cross_entropy(logits, data.labels)
                               : sigmoid_binary_cross_entropy(logits, data.label_matrix);
  std::vector<double> s(l.loss.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = -l.loss[i];
  return s;
}

AttackReport confidence_attack(const MlpParams& encoder, const MlpParams& classifier,
                               const Dataset& members, const Dataset& nonmembers) {
  if (members.rows() == 0 || nonmembers.rows() == 0) {
    throw ConfigError("attack needs non-empty member and non-member sets");
  }
  const auto m = confidence_scores(encoder, classifier, members);
  const auto n = confidence_scores(encoder, classifier, nonmembers);
  return attack_from_scores("confidence", m, n);
}

double gmm_shift_attack(const ClassConditionalGmms& without,
                        const ClassConditionalGmms& with,
                        std::span<const double> candidate_feature, int candidate_class) {
  if (without.dim != with.dim || candidate_feature.size() != with.dim) {
    throw ShapeError("mixture sets and candidate disagree on feature dimension");
  }
  return log_density(class_model(with, candidate_class), candidate_feature) -
         log_density(class_model(without, candidate_class), candidate_feature);
}

AttackReport gmm_shift_report(const MlpParams& encoder,
                              const ClassConditionalGmms& without,
                              const ClassConditionalGmms& with,
                              const Dataset& members, const Dataset& nonmembers) {
  const auto scores = [&](const Dataset& d) {
    const Matrix f = predict(encoder, d.features);
    std::vector<double> s(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i) {
      s[i] = gmm_shift_attack(without, with, f.row(i), candidate_class(d, i));
    }
    return s;
  };
  const auto m = scores(members);
  const auto n = scores(nonmembers);
  return attack_from_scores("gmm-shift", m, n);
}

std::vector<AttackRow> compare_privacy(std::span<const PrivacySetting> settings) {
  std::vector<AttackRow> rows;
  for (const auto& s : settings) {
    if (!s.package || !s.members || !s.nonmembers || !s.reference) {
      throw ConfigError("privacy setting '" + s.label + "' is incomplete");
    }
    const SharePackage& pkg = *s.package;
    rows.push_back({s.label, confidence_attack(pkg.encoder, pkg.classifier, *s.members,
                                               *s.nonmembers),
                    s.seed});

    const Matrix ref = predict(pkg.encoder, s.reference->features);
    ClassFitResult without;
    if (pkg.gmms.pooled()) {
      ClassFitOptions fit = s.fit;
      fit.pooled = true;
      without = fit_class_conditional(ref, s.reference->labels, s.reference->classes(), fit);
    } else {
      without = fit_class_conditional(ref, s.reference->labels, s.reference->classes(), s.fit);
    }
    rows.push_back({s.label,
                    gmm_shift_report(pkg.encoder, without.gmms, pkg.gmms, *s.members,
                                     *s.nonmembers),
                    s.seed});
  }
  return rows;
}

std::vector<AttackRow> membership_experiment(const DomainSpec& data,
                                             const AttackConfig& attack,
                                             const PretrainConfig& base,
                                             const ShareConfig& share,
                                             std::uint64_t seed) {
  if (data.label_mode != LabelMode::kMulticlass) {
    throw ConfigError("membership experiment supports multiclass data only");
  }
  DomainSpec spec = data;
  spec.seed = derive_seed(seed, "attack");
  const Dataset members = generate_source_like(spec, attack.members_per_class, "members");
  const Dataset nonmembers =
      generate_source_like(spec, attack.nonmembers_per_class, "nonmembers");
  const Dataset reference = generate_source_like(spec, attack.reference_per_class, "reference");

  std::vector<SharePackage> packages;
  std::vector<std::string> labels;
  for (double eps : attack.epsilons) {
    PretrainConfig cfg = base;
    cfg.steps = attack.steps;
    cfg.learning_rate = attack.learning_rate;
    cfg.batch_size = attack.batch_size;
    cfg.seed = derive_seed(seed, "attack-train");
    cfg.dp = std::isfinite(eps);
    if (cfg.dp) {
      if (!(eps > 0.0)) throw ConfigError("attack.epsilons entries must be > 0");
      cfg.target_epsilon = eps;
    }
    const Pretrained model = pretrain_source(members, cfg);
    ShareConfig sc = share;
    sc.seed = derive_seed(seed, "attack-share");
    packages.push_back(build_share(model, members, sc).package);
    char buf[32];
    std::snprintf(buf, sizeof buf, "eps=%g", eps);
    labels.emplace_back(buf);
  }

  ClassFitOptions fit;
  fit.k_per_class = share.k;
  fit.tol = share.tol;
  fit.max_iter = share.max_iter;
  fit.seed = derive_seed(seed, "attack-reference-gmm");
  std::vector<PrivacySetting> settings;
  for (std::size_t i = 0; i < packages.size(); ++i) {
    settings.push_back({labels[i], &packages[i], &members, &nonmembers, &reference, fit, seed});
  }
  return compare_privacy(settings);
}

void write_attack_csv(std::ostream& out, std::span<const AttackRow> rows) {
  out << "setting,attack,auc,n_member,n_nonmember,seed\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.report.auc);
    out << r.setting << "," << r.report.attack << "," << buf << "," << r.report.member.n
        << "," << r.report.nonmember.n << "," << r.seed << "\n";
  }
}

}  // namespace dpda
