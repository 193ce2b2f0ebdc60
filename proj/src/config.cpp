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

#include "dpda/config.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <sstream>

#include "dpda/error.hpp"
#include "dpda/rng.hpp"
#include "dpda/share.hpp"

namespace dpda {

std::string_view value_type_name(ValueType t) {
  switch (t) {
    case ValueType::kInt: return "int";
    case ValueType::kFloat: return "float";
    case ValueType::kBool: return "bool";
    case ValueType::kString: return "string";
    case ValueType::kFloats: return "floats";
    case ValueType::kInts: return "ints";
  }
  return "?";
}

namespace {

struct SchemaRow {
  const char* key;
  ValueType type;
  const char* value;
};

constexpr ValueType I = ValueType::kInt;
constexpr ValueType F = ValueType::kFloat;
constexpr ValueType B = ValueType::kBool;
constexpr ValueType S = ValueType::kString;
constexpr ValueType FL = ValueType::kFloats;
constexpr ValueType IL = ValueType::kInts;

const SchemaRow kSchema[] = {
    {"run.seed", I, "7"},
    {"run.threads", I, "1"},
    {"run.out_dir", S, "run"},
    {"paths.source", S, ""},
    {"paths.target", S, ""},
    {"paths.model", S, ""},
    {"paths.share", S, ""},
    {"paths.target_encoder", S, ""},
    {"data.n_classes", I, "4"},
    {"data.dim", I, "16"},
    {"data.samples_per_class", I, "500"},
    {"data.radius", F, "3"},
    {"data.within_scale", F, "1"},
    {"data.rotation_deg", F, "30"},
    {"data.translation", FL, ""},
    {"data.covariance_scale", F, "1"},
    {"data.label_mode", S, "multiclass"},
    {"data.label_noise", F, "0.1"},
    {"model.encoder_hidden", IL, "64,32"},
    {"model.feature_dim", I, "16"},
    {"pretrain.learning_rate", F, "5e-05"},
    {"pretrain.weight_decay", F, "0.01"},
    {"pretrain.batch_size", I, "64"},
    {"pretrain.steps", I, "2000"},
    {"dp.enabled", B, "false"},
    {"dp.target_epsilon", F, "1"},
    {"dp.noise_multiplier", F, "1"},
    {"dp.clip_norm", F, "1"},
    {"dp.accumulation_steps", I, "1"},
    {"dp.delta", F, "1e-05"},
    {"dp.private_last_layers", I, "0"},
    {"share.k", I, "6"},
    {"share.tol", F, "1e-06"},
    {"share.max_iter", I, "200"},
    {"share.pooled", B, "false"},
    {"adapt.method", S, "cdan"},
    {"adapt.temperature", F, "20"},
    {"adapt.lambda_kd", F, "1"},
    {"adapt.lambda_im", F, "1"},
    {"adapt.lambda_adv", F, "1"},
    {"adapt.learning_rate", F, "1e-05"},
    {"adapt.weight_decay", F, "0.01"},
    {"adapt.batch_size", I, "64"},
    {"adapt.steps", I, "1000"},
    {"adapt.static_pool", B, "false"},
    {"adapt.resample_count", I, "0"},
    {"adapt.discriminator_hidden", I, "64"},
    {"adapt.conditioning", S, "outer"},
    {"evaluate.adapted", B, "true"},
    {"evaluate.embeddings", S, "none"},
    {"attack.members_per_class", I, "25"},
    {"attack.nonmembers_per_class", I, "25"},
    {"attack.reference_per_class", I, "25"},
    {"attack.steps", I, "3000"},
    {"attack.learning_rate", F, "0.001"},
    {"attack.batch_size", I, "16"},
    {"attack.epsilons", FL, "inf,15,2.5"},
    {"accountant.q", F, "0.01"},
    {"accountant.sigma", F, "1"},
    {"accountant.steps", I, "1000"},
    {"accountant.delta", F, "1e-05"},
    {"accountant.orders", FL, ""},
};

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

bool parse_int(const std::string& s, std::int64_t& out) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && r.ec == std::errc() && r.ptr == s.data() + s.size();
}

bool parse_float(const std::string& s, double& out) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && r.ec == std::errc() && r.ptr == s.data() + s.size();
}

bool value_ok(ValueType t, const std::string& v) {
  std::int64_t i;
  double d;
  switch (t) {
    case ValueType::kInt: return parse_int(v, i);
    case ValueType::kFloat: return parse_float(v, d);
    case ValueType::kBool: return v == "true" || v == "false";
    case ValueType::kString: return true;
    case ValueType::kFloats:
      for (const auto& x : split_list(v)) {
        if (!parse_float(x, d)) return false;
      }
      return true;
    case ValueType::kInts:
      for (const auto& x : split_list(v)) {
        if (!parse_int(x, i)) return false;
      }
      return true;
  }
  return false;
}

}  // namespace

Config Config::defaults() {
  Config c;
  for (const auto& row : kSchema) {
    c.entries_[row.key] = Entry{row.type, row.value};
    c.order_.push_back(row.key);
  }
  return c;
}

void Config::set(const std::string& key, std::string value) {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
  value = trim(value);
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
    value = value.substr(1, value.size() - 2);
  }
  if (!value_ok(it->second.type, value)) {
    throw ConfigError("config key '" + key + "' expects " +
                      std::string(value_type_name(it->second.type)) + ", got '" + value +
                      "'");
  }
  it->second.value = std::move(value);
}

void Config::merge_text(std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError(origin + ": unterminated section header", line_no);
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      bool known = false;
      for (const auto& k : order_) known = known || k.rfind(section + ".", 0) == 0;
      if (!known) throw ConfigError(where + ": unknown config section '" + section + "'");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(origin + ": expected key = value", line_no);
    std::string lhs = trim(std::string_view(t).substr(0, eq));
    const std::string rhs = trim(std::string_view(t).substr(eq + 1));
    std::string type;
    if (const auto colon = lhs.find(':'); colon != std::string::npos) {
      type = trim(std::string_view(lhs).substr(colon + 1));
      lhs = trim(std::string_view(lhs).substr(0, colon));
    }
    if (section.empty()) throw ParseError(origin + ": key '" + lhs + "' outside a section", line_no);
    const std::string key = section + "." + lhs;
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(where + ": unknown config key '" + key + "'");
    if (!type.empty() && type != value_type_name(it->second.type)) {
      throw ConfigError(where + ": config key '" + key + "' has type " +
                        std::string(value_type_name(it->second.type)) + ", annotated " + type);
    }
    try {
      set(key, rhs);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

void Config::merge_file(const std::string& path) { merge_text(read_text_file(path), path); }

void Config::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  set(trim(assignment.substr(0, eq)), std::string(assignment.substr(eq + 1)));
}

const Config::Entry& Config::entry(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::int64_t Config::get_int(const std::string& key) const {
  std::int64_t v = 0;
  parse_int(entry(key).value, v);
  return v;
}

std::uint64_t Config::get_uint(const std::string& key) const {
  const auto v = get_int(key);
  if (v < 0) throw ConfigError("config key '" + key + "' must be >= 0");
  return static_cast<std::uint64_t>(v);
}

std::size_t Config::get_size(const std::string& key) const {
  return static_cast<std::size_t>(get_uint(key));
}

double Config::get_float(const std::string& key) const {
  double v = 0.0;
  parse_float(entry(key).value, v);
  return v;
}

bool Config::get_bool(const std::string& key) const { return entry(key).value == "true"; }

const std::string& Config::get_string(const std::string& key) const { return entry(key).value; }

std::vector<double> Config::get_floats(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : split_list(entry(key).value)) {
    double v = 0.0;
    parse_float(s, v);
    out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> Config::get_sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& s : split_list(entry(key).value)) {
    std::int64_t v = 0;
    parse_int(s, v);
    if (v < 0) throw ConfigError("config key '" + key + "' entries must be >= 0");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::string Config::resolved_text() const {
  std::string out;
  std::string section;
  for (const auto& key : order_) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s != section) {
      out += (section.empty() ? "[" : "\n[") + s + "]\n";
      section = s;
    }
    const auto& e = entries_.at(key);
    out += key.substr(dot + 1) + ": " + std::string(value_type_name(e.type)) + " = " + e.value + "\n";
  }
  return out;
}

std::string Config::digest() const {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& key : order_) {
    if (key == "run.out_dir" || key == "run.threads" || key.rfind("paths.", 0) == 0) continue;
    const auto& e = entries_.at(key);
    const std::string line =
        key + ": " + std::string(value_type_name(e.type)) + " = " + e.value + "\n";
    for (unsigned char ch : line) {
      h ^= ch;
      h *= 1099511628211ull;
    }
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

namespace {

std::string or_default(const std::string& v, const std::string& dir, const char* name) {
  return v.empty() ? dir + "/" + name : v;
}

}  // namespace

RunConfig resolve(const Config& c) {
  RunConfig r;
  r.seed = c.get_uint("run.seed");
  r.threads = c.get_size("run.threads");
  if (r.threads == 0) throw ConfigError("config key 'run.threads' must be >= 1");
  r.out_dir = c.get_string("run.out_dir");
  if (r.out_dir.empty()) throw ConfigError("config key 'run.out_dir' must not be empty");
  r.paths.source = or_default(c.get_string("paths.source"), r.out_dir, "source.csv");
  r.paths.target = or_default(c.get_string("paths.target"), r.out_dir, "target.csv");
  r.paths.model = or_default(c.get_string("paths.model"), r.out_dir, "model.json");
  r.paths.share = or_default(c.get_string("paths.share"), r.out_dir, "share.json");
  r.paths.target_encoder =
      or_default(c.get_string("paths.target_encoder"), r.out_dir, "target_encoder.json");

  DomainSpec& d = r.data;
  d.n_classes = c.get_size("data.n_classes");
  d.dim = c.get_size("data.dim");
  d.samples_per_class = c.get_size("data.samples_per_class");
  d.radius = c.get_float("data.radius");
  d.within_scale = c.get_float("data.within_scale");
  d.shift.rotation_deg = c.get_float("data.rotation_deg");
  d.shift.translation = c.get_floats("data.translation");
  d.shift.covariance_scale = c.get_float("data.covariance_scale");
  const auto& mode = c.get_string("data.label_mode");
  if (mode == "multiclass") {
    d.label_mode = LabelMode::kMulticlass;
  } else if (mode == "multilabel") {
    d.label_mode = LabelMode::kMultilabel;
  } else {
    throw ConfigError("config key 'data.label_mode' must be multiclass or multilabel");
  }
  d.label_noise = c.get_float("data.label_noise");
  d.seed = derive_seed(r.seed, "data");
  d.validate();

  PretrainConfig& p = r.pretrain;
  p.model.encoder_hidden = c.get_sizes("model.encoder_hidden");
  p.model.feature_dim = c.get_size("model.feature_dim");
  p.learning_rate = c.get_float("pretrain.learning_rate");
  p.weight_decay = c.get_float("pretrain.weight_decay");
  p.batch_size = c.get_size("pretrain.batch_size");
  p.steps = c.get_uint("pretrain.steps");
  p.seed = r.seed;
  p.dp = c.get_bool("dp.enabled");
  p.target_epsilon = c.get_float("dp.target_epsilon");
  p.noise_multiplier = c.get_float("dp.noise_multiplier");
  p.clip_norm = c.get_float("dp.clip_norm");
  p.accumulation_steps = c.get_size("dp.accumulation_steps");
  p.delta = c.get_float("dp.delta");
  p.private_last_layers = c.get_size("dp.private_last_layers");
  p.validate();

  ShareConfig& s = r.share;
  s.k = c.get_size("share.k");
  if (s.k == 0) throw ConfigError("config key 'share.k' must be >= 1");
  s.tol = c.get_float("share.tol");
  s.max_iter = c.get_size("share.max_iter");
  s.pooled = c.get_bool("share.pooled");
  s.seed = r.seed;
  s.config_digest = c.digest();

  AdaptConfig& a = r.adapt;
  const auto& method = c.get_string("adapt.method");
  if (method == "cdan") {
    a.method = AdaptMethod::kCdan;
  } else if (method == "dann") {
    a.method = AdaptMethod::kDann;
  } else {
    throw ConfigError("config key 'adapt.method' must be dann or cdan");
  }
  a.temperature = c.get_float("adapt.temperature");
  a.lambda_kd = c.get_float("adapt.lambda_kd");
  a.lambda_im = c.get_float("adapt.lambda_im");
  a.lambda_adv = c.get_float("adapt.lambda_adv");
  a.learning_rate = c.get_float("adapt.learning_rate");
  a.weight_decay = c.get_float("adapt.weight_decay");
  a.batch_size = c.get_size("adapt.batch_size");
  a.steps = c.get_size("adapt.steps");
  a.static_pool = c.get_bool("adapt.static_pool");
  a.resample_count = c.get_size("adapt.resample_count");
  a.discriminator_hidden = c.get_size("adapt.discriminator_hidden");
  const auto& cond = c.get_string("adapt.conditioning");
  if (cond == "outer") {
    a.conditioning = Conditioning::kOuterProduct;
  } else if (cond == "concat") {
    a.conditioning = Conditioning::kConcat;
  } else {
    throw ConfigError("config key 'adapt.conditioning' must be outer or concat");
  }
  a.seed = derive_seed(r.seed, "adapt");
  a.validate();

  r.evaluate_adapted = c.get_bool("evaluate.adapted");
  const auto& emb = c.get_string("evaluate.embeddings");
  if (emb == "none") {
    r.write_embeddings = false;
  } else if (emb == "raw") {
    r.write_embeddings = true;
    r.embeddings = Projection::kNone;
  } else if (emb == "pca2") {
    r.write_embeddings = true;
    r.embeddings = Projection::kPca2;
  } else {
    throw ConfigError("config key 'evaluate.embeddings' must be none, raw or pca2");
  }

  AttackConfig& k = r.attack;
  k.members_per_class = c.get_size("attack.members_per_class");
  k.nonmembers_per_class = c.get_size("attack.nonmembers_per_class");
  k.reference_per_class = c.get_size("attack.reference_per_class");
  k.steps = c.get_uint("attack.steps");
  k.learning_rate = c.get_float("attack.learning_rate");
  k.batch_size = c.get_size("attack.batch_size");
  k.epsilons = c.get_floats("attack.epsilons");
  if (k.members_per_class == 0 || k.nonmembers_per_class == 0 || k.reference_per_class == 0) {
    throw ConfigError("config keys 'attack.*_per_class' must be >= 1");
  }

  AccountantConfig& acc = r.accountant;
  acc.q = c.get_float("accountant.q");
  acc.sigma = c.get_float("accountant.sigma");
  acc.steps = c.get_uint("accountant.steps");
  acc.delta = c.get_float("accountant.delta");
  acc.orders = c.get_floats("accountant.orders");

  r.resolved_text = c.resolved_text();
  r.digest = c.digest();
  return r;
}

}  // namespace dpda
