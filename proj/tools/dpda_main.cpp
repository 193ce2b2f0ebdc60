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

// dpda: command-line driver.
//
//   dpda <subcommand> [--config FILE] [--set section.key=value]... [flags]
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpda/accountant.hpp"
#include "dpda/config.hpp"
#include "dpda/data.hpp"
#include "dpda/error.hpp"
#include "dpda/mia.hpp"
#include "dpda/parallel.hpp"
#include "dpda/pipeline.hpp"
#include "dpda/share.hpp"

#ifndef DPDA_VERSION
#define DPDA_VERSION "unknown"
#endif

namespace {

using namespace dpda;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
};

RunConfig load_run_config(const CommonOptions& opts) {
  Config cfg = Config::defaults();
  if (!opts.config_path.empty()) cfg.merge_file(opts.config_path);
  for (const auto& o : opts.overrides) cfg.apply_override(o);
  return resolve(cfg);
}

void prepare_out_dir(const RunConfig& run) {
  std::filesystem::create_directories(run.out_dir);
  write_text_file(run.out_dir + "/config.resolved.ini", run.resolved_text);
  write_text_file(run.out_dir + "/VERSION", std::string(DPDA_VERSION) + "\n");
}

template <typename Fn>
void write_file(const std::string& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  fn(out);
}

Dataset load_source(const RunConfig& run) {
  CsvSchema schema;
  schema.mode = run.data.label_mode;
  return load_csv(run.paths.source, schema);
}

Dataset load_target(const RunConfig& run, const std::vector<std::string>& classes) {
  CsvSchema schema;
  schema.mode = run.data.label_mode;
  schema.known_classes = classes;
  return load_csv(run.paths.target, schema);
}

void cmd_gen_data(const RunConfig& run) {
  const auto [source, target] = generate_pair(run.data);
  save_csv(run.paths.source, source);
  save_csv(run.paths.target, target);
  std::cout << "wrote " << run.paths.source << " (" << source.rows() << " rows), "
            << run.paths.target << " (" << target.rows() << " rows)\n";
}

void cmd_pretrain(const RunConfig& run) {
  const Dataset source = load_source(run);
  const Pretrained model = pretrain_source(source, run.pretrain);
  ModelFile file{model.encoder, model.classifier, model.receipt, {}};
  file.meta.feature_dim = model.encoder.output_dim();
  file.meta.label_mode = model.mode;
  file.meta.class_names = model.class_names;
  file.meta.seed = run.seed;
  file.meta.config_digest = run.digest;
  save_model(run.paths.model, file);
  write_file(run.out_dir + "/train_log.csv", [&](std::ostream& o) { write_train_log(o, model.log); });
  if (model.receipt) {
    PrivacyReport report;
    report.eps = to_eps_delta(compose(model.ledger), model.ledger.delta);
    report.q = model.receipt->q;
    report.sigma = model.receipt->sigma;
    report.steps = model.receipt->steps;
    report.scheme = model.ledger.sampling_scheme;
    write_text_file(run.out_dir + "/ledger.json", report.to_json() + "\n");
    std::cout << "dp pretraining: sigma=" << model.receipt->sigma
              << " epsilon=" << model.receipt->epsilon << " delta=" << model.receipt->delta
              << "\n";
    std::cerr << kSamplingNote << "\n";
  }
  std::cout << "wrote " << run.paths.model << "\n";
}

void cmd_share(const RunConfig& run) {
  const ModelFile file = load_model(run.paths.model);
  Dataset source = load_source(run);
  if (source.mode == LabelMode::kMulticlass) {
    CsvSchema schema;
    schema.known_classes = file.meta.class_names;
    source = load_csv(run.paths.source, schema);
  }
  Pretrained model;
  model.encoder = file.encoder;
  model.classifier = file.classifier;
  model.receipt = file.privacy;
  model.mode = file.meta.label_mode;
  model.class_names = file.meta.class_names;
  ShareConfig sc = run.share;
  const ShareBuild build = build_share(model, source, sc);
  for (const auto& n : build.notes) std::cerr << "note: " << n << "\n";
  save_share(run.paths.share, build.package);
  std::cout << "wrote " << run.paths.share << "\n";
}

void cmd_adapt(const RunConfig& run) {
  const SharePackage pkg = load_share(run.paths.share);
  const Dataset target = load_target(run, pkg.meta.class_names);
  const AdaptResult result = adapt_target(pkg, target.features, run.adapt);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  write_text_file(run.paths.target_encoder, serialize_network(result.encoder));
  write_file(run.out_dir + "/adapt_log.csv",
             [&](std::ostream& o) { write_adapt_log(o, result.log); });
  std::cout << "wrote " << run.paths.target_encoder << "\n";
}

void cmd_evaluate(const RunConfig& run) {
  const SharePackage pkg = load_share(run.paths.share);
  const Dataset target = load_target(run, pkg.meta.class_names);
  MlpParams encoder = pkg.encoder;
  if (run.evaluate_adapted) encoder = parse_network(read_text_file(run.paths.target_encoder));
  if (encoder.input_dim() != pkg.encoder.input_dim() ||
      encoder.output_dim() != pkg.encoder.output_dim()) {
    throw ConfigError("target encoder does not match the package encoder shape");
  }
  const Metrics m = evaluate(encoder, pkg.classifier, target);
  write_file(run.out_dir + "/metrics.csv", [&](std::ostream& o) { write_metrics_csv(o, m); });
  if (run.write_embeddings) {
    write_file(run.out_dir + "/embeddings.csv",
               [&](std::ostream& o) { export_embeddings(o, encoder, target, run.embeddings); });
  }
  write_metrics_csv(std::cout, m);
}

void cmd_attack(const RunConfig& run) {
  const auto rows =
      membership_experiment(run.data, run.attack, run.pretrain, run.share, run.seed);
  write_file(run.out_dir + "/attack.csv", [&](std::ostream& o) { write_attack_csv(o, rows); });
  write_attack_csv(std::cout, rows);
  std::cerr << "attack numbers are produced by this harness on synthetic data\n";
}

void cmd_accountant(const RunConfig& run) {
  const auto& a = run.accountant;
  if (!(a.q > 0.0 && a.q <= 1.0)) throw ConfigError("config key 'accountant.q' must be in (0, 1]");
  if (!(a.sigma >= 0.0)) throw ConfigError("config key 'accountant.sigma' must be >= 0");
  if (!(a.delta > 0.0 && a.delta < 1.0)) {
    throw ConfigError("config key 'accountant.delta' must be in (0, 1)");
  }
  const std::vector<double> orders = a.orders.empty() ? default_orders() : a.orders;
  PrivacyReport report;
  report.eps = epsilon_for(a.q, a.sigma, a.steps, a.delta, orders);
  report.q = a.q;
  report.sigma = a.sigma;
  report.steps = a.steps;
  report.scheme = kSchemePoisson;
  std::cout << report.to_json() << "\n";
  if (sufficient_sigma_applies(a.q, a.steps, report.eps.epsilon)) {
    std::cerr << "sufficient sigma for this epsilon: "
              << sufficient_sigma(a.q, a.steps, report.eps.epsilon, a.delta) << "\n";
  }
  write_text_file(run.out_dir + "/privacy_report.json", report.to_json() + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private source-free domain adaptation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DPDA_VERSION);

  CommonOptions opts;
  std::size_t threads = 0;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opts.config_path, "Run config file")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", opts.overrides, "Override: section.key=value")->take_all();
    sub->add_option("-j,--threads", threads, "Worker threads (overrides run.threads)");
  };

  struct SubDef {
    const char* name;
    const char* help;
    void (*run)(const RunConfig&);
  };
  const SubDef defs[] = {
      {"gen-data", "Generate the synthetic source/target CSV pair", cmd_gen_data},
      {"pretrain", "Train the source encoder and classifier", cmd_pretrain},
      {"share", "Fit per-class mixtures and write the share package", cmd_share},
      {"adapt", "Adapt a target encoder from the share package", cmd_adapt},
      {"evaluate", "Write per-class precision/recall/F1 on the target CSV", cmd_evaluate},
      {"attack", "Run membership-inference attacks across privacy settings", cmd_attack},
      {"accountant", "Print the RDP accountant's privacy report", cmd_accountant},
  };
  std::vector<std::pair<CLI::App*, const SubDef*>> subs;
  double q = -1, sigma = -1, delta = -1;
  long long steps = -1;
  std::string orders;
  for (const auto& d : defs) {
    CLI::App* sub = app.add_subcommand(d.name, d.help);
    add_common(sub);
    if (std::string(d.name) == "accountant") {
      sub->add_option("--q", q, "Sampling rate");
      sub->add_option("--sigma", sigma, "Noise multiplier");
      sub->add_option("--steps", steps, "Number of steps T");
      sub->add_option("--delta", delta, "Target delta");
      sub->add_option("--orders", orders, "Comma-separated RDP orders");
    }
    subs.emplace_back(sub, &d);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  char buf[64];
  const auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  if (q >= 0) opts.overrides.push_back("accountant.q=" + fmt(q));
  if (sigma >= 0) opts.overrides.push_back("accountant.sigma=" + fmt(sigma));
  if (delta >= 0) opts.overrides.push_back("accountant.delta=" + fmt(delta));
  if (steps >= 0) opts.overrides.push_back("accountant.steps=" + std::to_string(steps));
  if (!orders.empty()) opts.overrides.push_back("accountant.orders=" + orders);
  if (threads > 0) opts.overrides.push_back("run.threads=" + std::to_string(threads));

  RunConfig run;
  try {
    run = load_run_config(opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  for (const auto& [sub, def] : subs) {
    if (!sub->parsed()) continue;
    try {
      set_thread_count(run.threads);
      prepare_out_dir(run);
      def->run(run);
      return 0;
    } catch (const ConfigError& e) {
      std::cerr << def->name << ": config error: " << e.what() << "\n";
      return kExitConfig;
    } catch (const std::exception& e) {
      std::cerr << def->name << ": error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }
  return kExitConfig;
}
