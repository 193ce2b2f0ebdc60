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
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dpda/data.hpp"
#include "dpda/mia.hpp"
#include "dpda/pipeline.hpp"
#include "dpda/uda.hpp"

// Run configuration text format:
//
//   # comment
//   [section]
//   key = value
//   key: type = value
//
// Every key belongs to a fixed schema (see Config::defaults()); unknown
// sections or keys are rejected. The optional type must match the schema
// type: int, float, bool, string, floats (comma list) or ints (comma list).
// Overrides use the dotted path, e.g. `adapt.steps=2000`.

namespace dpda {

enum class ValueType { kInt, kFloat, kBool, kString, kFloats, kInts };

std::string_view value_type_name(ValueType t);

class Config {
 public:
  struct Entry {
    ValueType type = ValueType::kString;
    std::string value;
  };

  // The complete schema populated with default values.
  static Config defaults();

  // Applies `key = value` lines from text; errors name the origin, line and
  // key. Throws ParseError for malformed lines, ConfigError for unknown keys,
  // type mismatches and unparsable values.
  void merge_text(std::string_view text, const std::string& origin);
  void merge_file(const std::string& path);
  // `section.key=value`.
  void apply_override(std::string_view assignment);
  void set(const std::string& dotted_key, std::string value);

  bool has(const std::string& dotted_key) const { return entries_.count(dotted_key) > 0; }
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  double get_float(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;
  std::vector<double> get_floats(const std::string& key) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;

  // Every key with its type and value, grouped by section, in schema order.
  std::string resolved_text() const;
  // FNV-1a over every key and value except run.out_dir, run.threads and
  // paths.*, as 16 hex digits.
  std::string digest() const;

 private:
  const Entry& entry(const std::string& key) const;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

struct PathsConfig {
  std::string source;          // source CSV
  std::string target;          // target CSV
  std::string model;           // pretrained model file
  std::string share;           // share package file
  std::string target_encoder;  // adapted encoder file
};

struct AccountantConfig {
  double q = 0.01;
  double sigma = 1.0;
  std::uint64_t steps = 1000;
  double delta = 1e-5;
  std::vector<double> orders;  // empty = default orders
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out_dir;
  PathsConfig paths;
  DomainSpec data;
  PretrainConfig pretrain;
  ShareConfig share;
  AdaptConfig adapt;
  bool evaluate_adapted = true;
  Projection embeddings = Projection::kNone;
  bool write_embeddings = false;
  AttackConfig attack;
  AccountantConfig accountant;
  std::string resolved_text;
  std::string digest;
};

// Builds typed settings and derives per-stage seeds from run.seed.
// Throws ConfigError on invalid values (message names the key).
RunConfig resolve(const Config& config);

}  // namespace dpda
