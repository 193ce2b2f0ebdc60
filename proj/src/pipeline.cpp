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

#include "dpda/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "dpda/error.hpp"
#include "dpda/loss.hpp"
#include "dpda/rng.hpp"

namespace dpda {

void PretrainConfig::validate() const {
  if (model.feature_dim == 0) throw ConfigError("model.feature_dim must be >= 1");
  for (std::size_t h : model.encoder_hidden) {
    if (h == 0) throw ConfigError("model.encoder_hidden entries must be >= 1");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("pretrain.learning_rate must be > 0");
  if (batch_size == 0) throw ConfigError("pretrain.batch_size must be >= 1");
  if (dp) {
    if (!(clip_norm > 0.0)) throw ConfigError("dp.clip_norm must be > 0");
    if (accumulation_steps == 0) throw ConfigError("dp.accumulation_steps must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("dp.delta must be in (0, 1)");
    if (target_epsilon <= 0.0 && noise_multiplier < 0.0) {
      throw ConfigError("dp.noise_multiplier must be >= 0");
    }
  }
}

PrivacyReceipt receipt_from_ledger(const PrivacyLedger& ledger) {
  PrivacyReceipt r;
  r.delta = ledger.delta;
  r.scheme = ledger.sampling_scheme;
  r.steps = ledger.total_count();
  if (!ledger.events.empty()) {
    r.q = ledger.events.back().q;
    r.sigma = ledger.events.back().sigma;
    r.epsilon = to_eps_delta(compose(ledger), ledger.delta).epsilon;
  }
  return r;
}

namespace {

MlpParams initial_network(std::size_t input_dim, std::size_t classes,
                          const ModelSpec& spec, std::uint64_t seed,
                          std::size_t* encoder_layers) {
  std::vector<std::size_t> dims = {input_dim};
  std::vector<Activation> acts;
  for (std::size_t h : spec.encoder_hidden) {
    dims.push_back(h);
    acts.push_back(Activation::kRelu);
  }
  dims.push_back(spec.feature_dim);
  acts.push_back(Activation::kIdentity);
  *encoder_layers = acts.size();
  dims.push_back(classes);
  acts.push_back(Activation::kIdentity);
  Rng rng = substream(seed, "init");
  return MlpParams::initialized(dims, acts, rng);
}

BatchLossFn source_loss(const Dataset& data) {
  if (data.mode == LabelMode::kMulticlass) {
    return [&data](const Matrix& logits, std::span<const std::size_t> rows) {
      std::vector<int> y;
      y.reserve(rows.size());
      for (std::size_t r : rows) y.push_back(data.labels[r]);
      return softmax_cross_entropy(logits, y);
    };
  }
  return [&data](const Matrix& logits, std::span<const std::size_t> rows) {
    return sigmoid_binary_cross_entropy(logits, gather_rows(data.label_matrix, rows));
  };
}

}  // namespace

Pretrained pretrain_source(const Dataset& source, const PretrainConfig& config) {
  config.validate();
  if (source.rows() == 0) throw ConfigError("source dataset is empty");
  if (source.classes() < 2) throw ConfigError("source dataset needs at least 2 classes");
  source.validate();

  std::size_t encoder_layers = 0;
  MlpParams net = initial_network(source.dim(), source.classes(), config.model,
                                  config.seed, &encoder_layers);
  AdamWHyper opt;
  opt.learning_rate = config.learning_rate;
  opt.weight_decay = config.weight_decay;
  const std::size_t batch = std::min(config.batch_size, source.rows());
  const BatchLossFn loss = source_loss(source);

  Pretrained out;
  out.mode = source.mode;
  out.class_names = source.class_names;
  if (config.dp) {
    DpConfig dp;
    dp.clip_norm = config.clip_norm;
    dp.batch_size = batch;
    dp.accumulation_steps = config.accumulation_steps;
    dp.dataset_size = source.rows();
    dp.total_iterations = config.steps;
    dp.delta = config.delta;
    dp.seed = derive_seed(config.seed, "pretrain");
    if (config.private_last_layers > 0) {
      dp.private_layers = last_layers_private(net, config.private_last_layers);
    }
    dp.noise_multiplier = config.noise_multiplier;
    if (config.target_epsilon > 0.0 && config.steps > 0) {
      dp.noise_multiplier = calibrate_sigma(dp.sampling_rate(), config.steps,
                                            config.target_epsilon, config.delta,
                                            default_orders());
    }
    TrainResult r = dp_train(std::move(net), source.features, loss, dp, opt);
    net = std::move(r.params);
    out.ledger = std::move(r.ledger);
    out.log = std::move(r.log);
    out.receipt = receipt_from_ledger(out.ledger);
    if (out.ledger.events.empty()) out.receipt->sigma = dp.noise_multiplier;
  } else {
    TrainResult r = train_nonprivate(std::move(net), source.features, loss, batch,
                                     config.steps, derive_seed(config.seed, "pretrain"),
                                     opt);
    net = std::move(r.params);
    out.log = std::move(r.log);
  }
  out.encoder = net.slice(0, encoder_layers);
  out.classifier = net.slice(encoder_layers, net.layer_count());
  return out;
}

ShareBuild build_share(const Pretrained& model, const Dataset& source,
                       const ShareConfig& config) {
  if (model.encoder.input_dim() != source.dim()) {
    throw ConfigError("source features do not match the encoder input");
  }
  if (source.classes() != model.classifier.output_dim()) {
    throw ConfigError("source classes do not match the classifier outputs");
  }
  const Matrix features = predict(model.encoder, source.features);

  ClassFitOptions fit;
  fit.k_per_class = config.k;
  fit.tol = config.tol;
  fit.max_iter = config.max_iter;
  fit.seed = derive_seed(config.seed, "gmm");
  fit.pooled = config.pooled;

  ClassFitResult fitted;
  if (source.mode == LabelMode::kMulticlass) {
    fitted = fit_class_conditional(features, source.labels, source.classes(), fit);
  } else {
    std::vector<std::size_t> rows;
    std::vector<int> labels;
    for (std::size_t i = 0; i < source.rows(); ++i) {
      for (std::size_t c = 0; c < source.classes(); ++c) {
        if (source.label_matrix(i, c) != 0.0) {
          rows.push_back(i);
          labels.push_back(static_cast<int>(c));
        }
      }
    }
    fitted = fit_class_conditional(gather_rows(features, rows), labels,
                                   source.classes(), fit);
  }

  ShareBuild out;
  out.notes = std::move(fitted.notes);
  SharePackage& pkg = out.package;
  pkg.encoder = model.encoder;
  pkg.classifier = model.classifier;
  pkg.gmms = std::move(fitted.gmms);
  pkg.privacy = model.receipt;
  pkg.meta.feature_dim = model.encoder.output_dim();
  pkg.meta.label_mode = model.mode;
  pkg.meta.class_names = model.class_names;
  pkg.meta.seed = config.seed;
  pkg.meta.config_digest = config.config_digest;
  pkg.validate();
  return out;
}

AdaptResult adapt_target(const SharePackage& pkg, const Matrix& target,
                         const AdaptConfig& config) {
  config.validate();
  pkg.validate();
  if (target.cols() != pkg.encoder.input_dim()) {
    throw ConfigError("target features have " + std::to_string(target.cols()) +
                      " columns, package encoder expects " +
                      std::to_string(pkg.encoder.input_dim()));
  }
  if (target.rows() == 0) throw ConfigError("target dataset is empty");

  AdaptResult out;
  AdaptConfig cfg = config;
  const LabelMode mode = pkg.meta.label_mode;
  if (mode == LabelMode::kMultilabel && cfg.lambda_im > 0.0) {
    out.warnings.push_back("information maximization is undefined for multilabel; disabled");
    cfg.lambda_im = 0.0;
  }

  out.encoder = pkg.encoder;
  if (cfg.steps == 0) return out;

  AdamWHyper hyper;
  hyper.learning_rate = cfg.learning_rate;
  hyper.weight_decay = cfg.weight_decay;
  AdamWState enc_opt = AdamWState::for_params(out.encoder, hyper);

  const std::size_t d = pkg.meta.feature_dim;
  const bool conditional = cfg.method == AdaptMethod::kCdan;
  const std::size_t disc_in =
      conditional ? conditioned_dim(d, pkg.classifier.output_dim(), cfg.conditioning) : d;
  Rng disc_rng = substream(cfg.seed, "adapt-disc");
  MlpParams disc = make_discriminator(disc_in, cfg.discriminator_hidden, disc_rng);
  AdamWState disc_opt = AdamWState::for_params(disc, hyper);

  const Matrix teacher = predict(pkg.classifier, predict(pkg.encoder, target));
  const std::size_t batch = std::min(cfg.batch_size, target.rows());

  Matrix pool;
  if (cfg.static_pool) {
    Rng rng = substream(cfg.seed, "adapt-resample");
    pool = sample_labeled(pkg.gmms, cfg.resample_count, rng).features;
  }

  AdversarialModels models{out.encoder, enc_opt, disc, disc_opt, pkg.classifier};
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Rng batch_rng = substream(cfg.seed, "adapt-batch", step);
    const auto rows = sample_without_replacement(target.rows(), batch, batch_rng);
    const Matrix xt = gather_rows(target, rows);
    const Matrix teacher_batch = gather_rows(teacher, rows);

    Matrix zs;
    if (cfg.static_pool) {
      std::vector<std::size_t> idx(batch);
      for (std::size_t i = 0; i < batch; ++i) idx[i] = (step * batch + i) % pool.rows();
      zs = gather_rows(pool, idx);
    } else {
      Rng rng = substream(cfg.seed, "adapt-resample", step);
      zs = sample_labeled(pkg.gmms, batch, rng).features;
    }

    const StepBatch sb{zs, xt, cfg.lambda_kd > 0.0 ? &teacher_batch : nullptr};
    StepLosses l = conditional ? cdan_step(models, sb, cfg, mode)
                               : dann_step(models, sb, cfg, mode);
    out.log.push_back({step + 1, l});
  }
  return out;
}

void write_adapt_log(std::ostream& out, const std::vector<AdaptLogRow>& log) {
  out << "step,kd,im_ent,im_div,disc,gen\n";
  char buf[192];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.step,
                  r.losses.kd, r.losses.im_ent, r.losses.im_div, r.losses.disc,
                  r.losses.gen);
    out << buf;
  }
}

Metrics evaluate(const MlpParams& encoder, const MlpParams& classifier,
                 const Dataset& data) {
  if (data.rows() == 0) throw ConfigError("cannot evaluate an empty dataset");
  data.validate();
  if (classifier.output_dim() != data.classes()) {
    throw ConfigError("dataset classes do not match the classifier outputs");
  }
  const Matrix logits = predict(classifier, predict(encoder, data.features));
  if (data.mode == LabelMode::kMulticlass) {
    std::vector<int> pred(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i) {
      const auto r = logits.row(i);
      pred[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return multiclass_metrics(data.labels, pred, data.class_names);
  }
  Matrix pred(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    pred.values()[i] = logits.values()[i] >= 0.0 ? 1.0 : 0.0;
  }
  return multilabel_metrics(data.label_matrix, pred, data.class_names);
}

void export_embeddings(std::ostream& out, const MlpParams& encoder,
                       const Dataset& data, Projection projection) {
  const Matrix features = predict(encoder, data.features);
  const Matrix coords = projection == Projection::kPca2 ? pca2(features).coords : features;
  out << "id,label";
  for (std::size_t j = 0; j < coords.cols(); ++j) out << ",c" << j;
  out << "\n";
  for (std::size_t i = 0; i < coords.rows(); ++i) {
    out << i << ",";
    if (data.mode == LabelMode::kMulticlass) {
      out << data.class_names.at(static_cast<std::size_t>(data.labels.at(i)));
    } else {
      bool first = true;
      for (std::size_t c = 0; c < data.classes(); ++c) {
        if (data.label_matrix(i, c) == 0.0) continue;
        out << (first ? "" : "|") << data.class_names[c];
        first = false;
      }
    }
    for (std::size_t j = 0; j < coords.cols(); ++j) {
      out << "," << format_double(coords(i, j));
    }
    out << "\n";
  }
}

}  // namespace dpda
