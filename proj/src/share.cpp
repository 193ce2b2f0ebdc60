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

#include "dpda/share.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dpda/error.hpp"
#include "json.hpp"

namespace dpda {

using Json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double_exact(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ParseError("bad decimal '" + std::string(s) + "'");
  }
  return v;
}

namespace {

Json encode_reals(std::span<const double> v) {
  Json arr = Json::array();
  for (double x : v) arr.push_back(format_double(x));
  return arr;
}

std::vector<double> decode_reals(const Json& arr, std::size_t expected, const char* what) {
  if (!arr.is_array()) throw ParseError(std::string(what) + ": expected array");
  if (arr.size() != expected) {
    throw ParseError(std::string(what) + ": expected " + std::to_string(expected) +
                     " values, got " + std::to_string(arr.size()));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& s : arr) {
    if (!s.is_string()) throw ParseError(std::string(what) + ": values must be decimal strings");
    out.push_back(parse_double_exact(s.get<std::string>()));
  }
  return out;
}

Json encode_matrix(std::size_t rows, std::size_t cols, std::span<const double> data) {
  Json m;
  m["rows"] = rows;
  m["cols"] = cols;
  m["data"] = encode_reals(data);
  return m;
}

Matrix decode_matrix(const Json& j, const char* what) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw ParseError(std::string(what) + ": expected {rows, cols, data}");
  }
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  return Matrix(rows, cols, decode_reals(j.at("data"), rows * cols, what));
}

Json encode_network(const MlpParams& net) {
  Json layers = Json::array();
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& s = net.layer(l);
    Json layer;
    layer["activation"] = std::string(activation_name(s.activation));
    layer["weight"] = encode_matrix(s.in, s.out, net.weight(l));
    layer["bias"] = encode_matrix(1, s.out, net.bias(l));
    layers.push_back(std::move(layer));
  }
  Json out;
  out["layers"] = std::move(layers);
  return out;
}

MlpParams decode_network(const Json& j, const char* what) {
  if (!j.is_object() || !j.contains("layers") || !j.at("layers").is_array()) {
    throw ParseError(std::string(what) + ": expected {layers: [...]}");
  }
  std::vector<Matrix> weights, biases;
  std::vector<std::size_t> dims;
  std::vector<Activation> acts;
  for (const auto& layer : j.at("layers")) {
    weights.push_back(decode_matrix(layer.at("weight"), what));
    biases.push_back(decode_matrix(layer.at("bias"), what));
    const auto& w = weights.back();
    if (dims.empty()) dims.push_back(w.rows());
    if (dims.back() != w.rows() || biases.back().cols() != w.cols()) {
      throw ParseError(std::string(what) + ": layer shapes do not chain");
    }
    dims.push_back(w.cols());
    try {
      acts.push_back(parse_activation(layer.at("activation").get<std::string>()));
    } catch (const ConfigError& e) {
      throw ParseError(std::string(what) + ": " + e.what());
    }
  }
  if (acts.empty()) throw ParseError(std::string(what) + ": no layers");
  MlpParams net(dims, acts);
  for (std::size_t l = 0; l < acts.size(); ++l) {
    std::copy(weights[l].values().begin(), weights[l].values().end(), net.weight(l).begin());
    std::copy(biases[l].values().begin(), biases[l].values().end(), net.bias(l).begin());
  }
  return net;
}

Json encode_gmms(const ClassConditionalGmms& gmms) {
  Json out = Json::object();
  for (const auto& [cls, model] : gmms.by_class) {
    std::vector<double> weights, means, variances;
    for (const auto& c : model.components) {
      weights.push_back(c.weight);
      means.insert(means.end(), c.mean.begin(), c.mean.end());
      variances.insert(variances.end(), c.variance.begin(), c.variance.end());
    }
    Json g;
    g["k"] = model.k();
    g["weights"] = encode_reals(weights);
    g["means"] = encode_matrix(model.k(), model.dim, means);
    g["variances"] = encode_matrix(model.k(), model.dim, variances);
    out[std::to_string(cls)] = std::move(g);
  }
  return out;
}

ClassConditionalGmms decode_gmms(const Json& j, std::size_t dim) {
  if (!j.is_object()) throw ParseError("gmms: expected object");
  ClassConditionalGmms out;
  out.dim = dim;
  for (const auto& [key, g] : j.items()) {
    int cls = 0;
    const auto r = std::from_chars(key.data(), key.data() + key.size(), cls);
    if (r.ec != std::errc() || r.ptr != key.data() + key.size()) {
      throw ParseError("gmms: bad class key '" + key + "'");
    }
    const auto k = g.at("k").get<std::size_t>();
    const auto weights = decode_reals(g.at("weights"), k, "gmm weights");
    const Matrix means = decode_matrix(g.at("means"), "gmm means");
    const Matrix vars = decode_matrix(g.at("variances"), "gmm variances");
    if (means.rows() != k || vars.rows() != k || means.cols() != dim || vars.cols() != dim) {
      throw ParseError("gmms: class " + key + " has inconsistent shapes");
    }
    GmmModel model;
    model.dim = dim;
    for (std::size_t c = 0; c < k; ++c) {
      GmmComponent comp;
      comp.weight = weights[c];
      comp.mean.assign(means.row(c).begin(), means.row(c).end());
      comp.variance.assign(vars.row(c).begin(), vars.row(c).end());
      model.components.push_back(std::move(comp));
    }
    out.by_class.emplace(cls, std::move(model));
  }
  return out;
}

Json encode_privacy(const std::optional<PrivacyReceipt>& r) {
  if (!r) return kNonPrivateMarker;
  Json p;
  p["epsilon"] = format_double(r->epsilon);
  p["delta"] = format_double(r->delta);
  p["sigma"] = format_double(r->sigma);
  p["q"] = format_double(r->q);
  p["steps"] = r->steps;
  p["accountant"] = r->accountant;
  p["scheme"] = r->scheme;
  return p;
}

std::optional<PrivacyReceipt> decode_privacy(const Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() != kNonPrivateMarker) {
      throw ParseError("privacy: expected receipt object or \"non-private\"");
    }
    return std::nullopt;
  }
  PrivacyReceipt r;
  r.epsilon = parse_double_exact(j.at("epsilon").get<std::string>());
  r.delta = parse_double_exact(j.at("delta").get<std::string>());
  r.sigma = parse_double_exact(j.at("sigma").get<std::string>());
  r.q = parse_double_exact(j.at("q").get<std::string>());
  r.steps = j.at("steps").get<std::uint64_t>();
  r.accountant = j.at("accountant").get<std::string>();
  r.scheme = j.at("scheme").get<std::string>();
  return r;
}

Json encode_meta(const ShareMeta& m) {
  Json j;
  j["feature_dim"] = m.feature_dim;
  j["label_mode"] = m.label_mode == LabelMode::kMulticlass ? "multiclass" : "multilabel";
  j["class_names"] = m.class_names;
  j["seed"] = m.seed;
  j["config_digest"] = m.config_digest;
  return j;
}

ShareMeta decode_meta(const Json& j) {
  ShareMeta m;
  m.feature_dim = j.at("feature_dim").get<std::size_t>();
  const auto mode = j.at("label_mode").get<std::string>();
  if (mode == "multiclass") {
    m.label_mode = LabelMode::kMulticlass;
  } else if (mode == "multilabel") {
    m.label_mode = LabelMode::kMultilabel;
  } else {
    throw ParseError("meta: unknown label_mode '" + mode + "'");
  }
  m.class_names = j.at("class_names").get<std::vector<std::string>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.config_digest = j.at("config_digest").get<std::string>();
  return m;
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

template <typename Fn>
auto guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed artifact: ") + e.what());
  }
}

}  // namespace

void SharePackage::validate() const {
  if (version != kShareFormatVersion) {
    throw ConfigError("unsupported share format version " + std::to_string(version));
  }
  const std::size_t d = meta.feature_dim;
  if (encoder.output_dim() != d) throw ConfigError("encoder output dim != feature_dim");
  if (classifier.input_dim() != d) throw ConfigError("classifier input dim != feature_dim");
  if (gmms.dim != d) throw ConfigError("gmm dim != feature_dim");
  if (classifier.output_dim() != meta.class_names.size()) {
    throw ConfigError("classifier outputs != class count");
  }
  for (const auto& [cls, model] : gmms.by_class) {
    if (cls != kPooledClass && (cls < 0 || static_cast<std::size_t>(cls) >= meta.class_names.size())) {
      throw ConfigError("gmm class " + std::to_string(cls) + " out of range");
    }
    if (model.dim != d) throw ConfigError("gmm dim != feature_dim");
    model.validate();
  }
  if (gmms.by_class.empty()) throw ConfigError("package carries no mixtures");
}

std::string serialize_share(const SharePackage& pkg) {
  pkg.validate();
  Json j;
  j["version"] = pkg.version;
  j["encoder"] = encode_network(pkg.encoder);
  j["classifier"] = encode_network(pkg.classifier);
  j["gmms"] = encode_gmms(pkg.gmms);
  j["privacy"] = encode_privacy(pkg.privacy);
  j["meta"] = encode_meta(pkg.meta);
  return j.dump(1) + "\n";
}

SharePackage parse_share(std::string_view text) {
  const Json j = parse_json(text);
  SharePackage pkg = guarded([&] {
    if (!j.is_object()) throw ParseError("share package: expected object");
    static const char* kKeys[] = {"version", "encoder", "classifier", "gmms", "privacy", "meta"};
    for (const char* key : kKeys) {
      if (!j.contains(key)) throw ParseError(std::string("share package: missing key ") + key);
    }
    if (j.size() != std::size(kKeys)) throw ParseError("share package: unexpected top-level key");
    SharePackage p;
    p.version = j.at("version").get<int>();
    p.encoder = decode_network(j.at("encoder"), "encoder");
    p.classifier = decode_network(j.at("classifier"), "classifier");
    p.meta = decode_meta(j.at("meta"));
    p.gmms = decode_gmms(j.at("gmms"), p.meta.feature_dim);
    p.privacy = decode_privacy(j.at("privacy"));
    return p;
  });
  pkg.validate();
  return pkg;
}

std::string serialize_privacy(const std::optional<PrivacyReceipt>& receipt) {
  return encode_privacy(receipt).dump(1) + "\n";
}

std::string serialize_model(const ModelFile& model) {
  Json j;
  j["version"] = kShareFormatVersion;
  j["encoder"] = encode_network(model.encoder);
  j["classifier"] = encode_network(model.classifier);
  j["privacy"] = encode_privacy(model.privacy);
  j["meta"] = encode_meta(model.meta);
  return j.dump(1) + "\n";
}

ModelFile parse_model(std::string_view text) {
  const Json j = parse_json(text);
  return guarded([&] {
    ModelFile m;
    m.encoder = decode_network(j.at("encoder"), "encoder");
    m.classifier = decode_network(j.at("classifier"), "classifier");
    m.privacy = decode_privacy(j.at("privacy"));
    m.meta = decode_meta(j.at("meta"));
    if (m.encoder.output_dim() != m.classifier.input_dim()) {
      throw ConfigError("model file: encoder output != classifier input");
    }
    return m;
  });
}

std::string serialize_network(const MlpParams& net) { return encode_network(net).dump(1) + "\n"; }

MlpParams parse_network(std::string_view text) {
  const Json j = parse_json(text);
  return guarded([&] { return decode_network(j, "network"); });
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

void save_share(const std::string& path, const SharePackage& pkg) {
  write_text_file(path, serialize_share(pkg));
}

SharePackage load_share(const std::string& path) {
  try {
    return parse_share(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_model(const std::string& path, const ModelFile& model) {
  write_text_file(path, serialize_model(model));
}

ModelFile load_model(const std::string& path) {
  try {
    return parse_model(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace dpda
