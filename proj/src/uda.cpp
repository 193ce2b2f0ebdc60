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

#include "dpda/uda.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "dpda/error.hpp"
#include "dpda/simd.hpp"

namespace dpda {

void AdaptConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("adapt.temperature must be > 0");
  if (lambda_kd < 0.0 || lambda_im < 0.0 || lambda_adv < 0.0) {
    throw ConfigError("adapt loss weights must be >= 0");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("adapt.learning_rate must be > 0");
  if (batch_size == 0) throw ConfigError("adapt.batch_size must be >= 1");
  if (discriminator_hidden == 0) throw ConfigError("adapt.discriminator_hidden must be >= 1");
  if (static_pool && resample_count == 0) {
    throw ConfigError("adapt.resample_count must be >= 1 in static-pool mode");
  }
}

double kd_loss(const Matrix& source_logits, const Matrix& target_logits,
               double temperature, Matrix* grad) {
  require_shape(target_logits, source_logits.rows(), source_logits.cols(),
                "kd_loss target logits");
  const std::size_t rows = source_logits.rows();
  if (grad) *grad = Matrix(rows, source_logits.cols());
  if (rows == 0) return 0.0;
  const Matrix p = softmax_rows(source_logits, temperature);
  const Matrix q = softmax_rows(target_logits, temperature);
  const double b = static_cast<double>(rows);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double row = 0.0;
    for (std::size_t k = 0; k < p.cols(); ++k) row -= p(i, k) * safe_log(q(i, k));
    total += row;
  }
  if (grad) {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t k = 0; k < p.cols(); ++k) {
        (*grad)(i, k) = temperature * (q(i, k) - p(i, k)) / b;
      }
    }
  }
  return temperature * temperature * total / b;
}

double kd_loss_binary(const Matrix& source_logits, const Matrix& target_logits,
                      double temperature, Matrix* grad) {
  require_shape(target_logits, source_logits.rows(), source_logits.cols(),
                "kd_loss_binary target logits");
  const std::size_t rows = source_logits.rows();
  if (grad) *grad = Matrix(rows, source_logits.cols());
  if (rows == 0) return 0.0;
  const Matrix p = sigmoid(source_logits, temperature);
  const Matrix q = sigmoid(target_logits, temperature);
  const double b = static_cast<double>(rows);
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p.values()[i];
    const double qi = q.values()[i];
    total -= pi * safe_log(qi) + (1.0 - pi) * safe_log(1.0 - qi);
    if (grad) grad->values()[i] = temperature * (qi - pi) / b;
  }
  return temperature * temperature * total / b;
}

ImLoss im_loss(const Matrix& target_logits, Matrix* grad) {
  const std::size_t rows = target_logits.rows();
  const std::size_t classes = target_logits.cols();
  if (classes < 2) throw ConfigError("im_loss needs at least 2 classes");
  ImLoss out;
  if (grad) *grad = Matrix(rows, classes);
  if (rows == 0) return out;
  const Matrix p = softmax_rows(target_logits);
  const double b = static_cast<double>(rows);
  std::vector<double> g(classes, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < classes; ++k) {
      out.ent -= p(i, k) * safe_log(p(i, k));
      g[k] += p(i, k);
    }
  }
  out.ent /= b;
  for (double& gk : g) {
    gk /= b;
    out.div += gk * safe_log(gk);
  }
  if (grad) {
    // d(ent + div)/dp_ik = (log g_k - log p_ik) / B; chain through softmax.
    std::vector<double> dp(classes);
    for (std::size_t i = 0; i < rows; ++i) {
      double inner = 0.0;
      for (std::size_t k = 0; k < classes; ++k) {
        dp[k] = (safe_log(g[k]) - safe_log(p(i, k))) / b;
        inner += p(i, k) * dp[k];
      }
      for (std::size_t k = 0; k < classes; ++k) {
        (*grad)(i, k) = p(i, k) * (dp[k] - inner);
      }
    }
  }
  return out;
}

MlpParams make_discriminator(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  const std::array<std::size_t, 4> dims{input_dim, hidden, hidden, 1};
  const std::array<Activation, 3> acts{Activation::kRelu, Activation::kRelu,
                                       Activation::kSigmoid};
  return MlpParams::initialized(dims, acts, rng);
}

double discriminator_loss(const Matrix& d_source, const Matrix& d_target) {
  double s = 0.0, t = 0.0;
  for (double v : d_source.values()) s -= safe_log(v);
  for (double v : d_target.values()) t -= safe_log(1.0 - v);
  return s / static_cast<double>(std::max<std::size_t>(1, d_source.size())) +
         t / static_cast<double>(std::max<std::size_t>(1, d_target.size()));
}

std::size_t conditioned_dim(std::size_t feature_dim, std::size_t classes,
                            Conditioning mode) {
  return mode == Conditioning::kOuterProduct ? feature_dim * classes
                                             : feature_dim + classes;
}

Matrix condition(const Matrix& features, const Matrix& predictions,
                 Conditioning mode) {
  if (features.rows() != predictions.rows()) {
    throw ShapeError("condition: feature and prediction rows differ");
  }
  const std::size_t d = features.cols();
  const std::size_t k = predictions.cols();
  Matrix out(features.rows(), conditioned_dim(d, k, mode));
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto o = out.row(i);
    if (mode == Conditioning::kOuterProduct) {
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t c = 0; c < k; ++c) o[j * k + c] = features(i, j) * predictions(i, c);
      }
    } else {
      std::copy_n(features.row(i).begin(), d, o.begin());
      std::copy_n(predictions.row(i).begin(), k, o.begin() + d);
    }
  }
  return out;
}

namespace {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}
double logistic(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

Matrix predictions_of(const Matrix& logits, LabelMode mode) {
  return mode == LabelMode::kMulticlass ? softmax_rows(logits) : sigmoid(logits);
}

// Gradient of the discriminator input w.r.t. the feature part, predictions
// fixed.
Matrix feature_grad_from_condition(const Matrix& input_grad,
                                   const Matrix& predictions,
                                   std::size_t feature_dim, Conditioning mode) {
  Matrix out(input_grad.rows(), feature_dim);
  const std::size_t k = predictions.cols();
  for (std::size_t i = 0; i < input_grad.rows(); ++i) {
    for (std::size_t j = 0; j < feature_dim; ++j) {
      if (mode == Conditioning::kOuterProduct) {
        double s = 0.0;
        for (std::size_t c = 0; c < k; ++c) s += input_grad(i, j * k + c) * predictions(i, c);
        out(i, j) = s;
      } else {
        out(i, j) = input_grad(i, j);
      }
    }
  }
  return out;
}

struct DiscInputs {
  Matrix source;
  Matrix target;
  Matrix target_predictions;  // empty for DANN
};

StepLosses adversarial_step(AdversarialModels& m, const StepBatch& batch,
                            const AdaptConfig& cfg, LabelMode mode,
                            bool conditional) {
  const std::size_t d = m.encoder.output_dim();
  if (batch.source_features.cols() != d) {
    throw ShapeError("resampled source features have " +
                     std::to_string(batch.source_features.cols()) +
                     " columns, encoder emits " + std::to_string(d));
  }
  if (m.classifier.input_dim() != d) {
    throw ShapeError("classifier input does not match encoder output");
  }
  const std::size_t expected_disc_in =
      conditional ? conditioned_dim(d, m.classifier.output_dim(), cfg.conditioning) : d;
  if (m.discriminator.input_dim() != expected_disc_in) {
    throw ShapeError("discriminator expects " +
                     std::to_string(m.discriminator.input_dim()) +
                     " inputs, adaptation feeds " + std::to_string(expected_disc_in));
  }
  StepLosses losses;

  // (a) discriminator step, encoder frozen.
  {
    const Matrix target_features = predict(m.encoder, batch.target_batch);
    Matrix source_in = batch.source_features;
    Matrix target_in = target_features;
    if (conditional) {
      source_in = condition(batch.source_features,
                            predictions_of(predict(m.classifier, batch.source_features), mode),
                            cfg.conditioning);
      target_in = condition(target_features,
                            predictions_of(predict(m.classifier, target_features), mode),
                            cfg.conditioning);
    }
    const ForwardCache cs = forward(m.discriminator, source_in);
    const ForwardCache ct = forward(m.discriminator, target_in);
    const Matrix& as = cs.last_preactivation();
    const Matrix& at = ct.last_preactivation();
    const double ns = static_cast<double>(as.rows());
    const double nt = static_cast<double>(at.rows());
    Matrix gs(as.rows(), 1), gt(at.rows(), 1);
    double ls = 0.0, lt = 0.0;
    for (std::size_t i = 0; i < as.rows(); ++i) {
      ls += softplus(-as(i, 0));
      gs(i, 0) = (logistic(as(i, 0)) - 1.0) / ns;
    }
    for (std::size_t i = 0; i < at.rows(); ++i) {
      lt += softplus(at(i, 0));
      gt(i, 0) = logistic(at(i, 0)) / nt;
    }
    losses.disc = ls / ns + lt / nt;
    BackwardResult bs = backward(m.discriminator, cs, gs, GradientAt::kLastPreActivation);
    const BackwardResult bt = backward(m.discriminator, ct, gt, GradientAt::kLastPreActivation);
    simd::axpy(1.0, bt.grad, bs.grad);
    adamw_update(m.discriminator, bs.grad, m.discriminator_opt);
  }

  // (b) encoder step, discriminator frozen.
  const bool train_encoder =
      cfg.lambda_adv > 0.0 || cfg.lambda_kd > 0.0 || cfg.lambda_im > 0.0;
  const ForwardCache enc = forward(m.encoder, batch.target_batch);
  const Matrix& features = enc.outputs();
  const ForwardCache cls = forward(m.classifier, features);
  const Matrix& logits = cls.outputs();
  const Matrix predictions = predictions_of(logits, mode);
  const std::size_t rows = features.rows();

  Matrix feature_grad(rows, d);
  {
    const Matrix disc_in =
        conditional ? condition(features, predictions, cfg.conditioning) : features;
    const ForwardCache cd = forward(m.discriminator, disc_in);
    const Matrix& a = cd.last_preactivation();
    Matrix ga(rows, 1);
    double lg = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      lg += softplus(-a(i, 0));
      ga(i, 0) = cfg.lambda_adv * (logistic(a(i, 0)) - 1.0) / static_cast<double>(rows);
    }
    losses.gen = lg / static_cast<double>(rows);
    if (train_encoder && cfg.lambda_adv > 0.0) {
      const BackwardResult bd = backward(m.discriminator, cd, ga,
                                         GradientAt::kLastPreActivation, true);
      feature_grad = conditional
                         ? feature_grad_from_condition(bd.input_grad, predictions, d,
                                                       cfg.conditioning)
                         : bd.input_grad;
    }
  }

  Matrix logit_grad(rows, logits.cols());
  if (batch.teacher_logits) {
    Matrix g;
    losses.kd = mode == LabelMode::kMulticlass
                    ? kd_loss(*batch.teacher_logits, logits, cfg.temperature, &g)
                    : kd_loss_binary(*batch.teacher_logits, logits, cfg.temperature, &g);
    simd::axpy(cfg.lambda_kd, g.values(), logit_grad.values());
  } else if (cfg.lambda_kd > 0.0) {
    throw ConfigError("distillation weight set but no teacher logits supplied");
  }
  if (mode == LabelMode::kMulticlass) {
    Matrix g;
    const ImLoss im = im_loss(logits, &g);
    losses.im_ent = im.ent;
    losses.im_div = im.div;
    simd::axpy(cfg.lambda_im, g.values(), logit_grad.values());
  }

  if (!train_encoder) return losses;
  const BackwardResult bc = backward(m.classifier, cls, logit_grad,
                                     GradientAt::kOutput, true);
  simd::axpy(1.0, bc.input_grad.values(), feature_grad.values());
  const BackwardResult be = backward(m.encoder, enc, feature_grad);
  adamw_update(m.encoder, be.grad, m.encoder_opt);
  return losses;
}

}  // namespace

StepLosses dann_step(AdversarialModels& models, const StepBatch& batch,
                     const AdaptConfig& config, LabelMode mode) {
  return adversarial_step(models, batch, config, mode, false);
}

StepLosses cdan_step(AdversarialModels& models, const StepBatch& batch,
                     const AdaptConfig& config, LabelMode mode) {
  return adversarial_step(models, batch, config, mode, true);
}

}  // namespace dpda
