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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpda/gmm.hpp"
#include "dpda/loss.hpp"
#include "dpda/mlp.hpp"

// The artifact that crosses from the source party to the target party.
//
// Text layout (UTF-8 JSON, keys in this order):
//   version     integer
//   encoder     {layers: [{activation, weight: M, bias: M}, ...]}
//   classifier  same as encoder
//   gmms        {"<class index>": {k, weights: [d...], means: M, variances: M}}
//   privacy     {epsilon, delta, sigma, q, steps, accountant, scheme}
//               or the string "non-private"
//   meta        {feature_dim, label_mode, class_names, seed, config_digest}
// where M = {rows, cols, data: ["<%.17g>", ...]} row-major. Every real is a
// decimal string with 17 significant digits so parsing restores the exact
// bits on any platform.

namespace dpda {

inline constexpr int kShareFormatVersion = 1;
inline constexpr const char* kNonPrivateMarker = "non-private";

struct PrivacyReceipt {
  double epsilon = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  double q = 0.0;
  std::uint64_t steps = 0;
  std::string accountant = "rdp";
  std::string scheme;
  friend bool operator==(const PrivacyReceipt&, const PrivacyReceipt&) = default;
};

struct ShareMeta {
  std::size_t feature_dim = 0;
  LabelMode label_mode = LabelMode::kMulticlass;
  std::vector<std::string> class_names;
  std::uint64_t seed = 0;
  std::string config_digest;
  friend bool operator==(const ShareMeta&, const ShareMeta&) = default;
};

struct SharePackage {
  int version = kShareFormatVersion;
  MlpParams encoder;
  MlpParams classifier;
  ClassConditionalGmms gmms;
  std::optional<PrivacyReceipt> privacy;
  ShareMeta meta;

  // Encoder output = classifier input = GMM dim = meta.feature_dim, and the
  // classifier has one output per class. Throws ConfigError.
  void validate() const;
  friend bool operator==(const SharePackage&, const SharePackage&) = default;
};

std::string serialize_share(const SharePackage& pkg);
// Throws ParseError on malformed text, ConfigError on a package that parses
// but fails validate().
SharePackage parse_share(std::string_view text);
void save_share(const std::string& path, const SharePackage& pkg);
SharePackage load_share(const std::string& path);

// Standalone encodings reused by other on-disk artifacts.
std::string serialize_privacy(const std::optional<PrivacyReceipt>& receipt);
std::string format_double(double v);
double parse_double_exact(std::string_view s);

// A trained network pair on disk: {version, encoder, classifier, privacy,
// meta}, same encodings as the share package.
struct ModelFile {
  MlpParams encoder;
  MlpParams classifier;
  std::optional<PrivacyReceipt> privacy;
  ShareMeta meta;
};
std::string serialize_model(const ModelFile& model);
ModelFile parse_model(std::string_view text);
void save_model(const std::string& path, const ModelFile& model);
ModelFile load_model(const std::string& path);
// Single network (e.g. an adapted target encoder).
std::string serialize_network(const MlpParams& net);
MlpParams parse_network(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace dpda
