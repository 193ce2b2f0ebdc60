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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "dpda/config.hpp"
#include "dpda/error.hpp"
#include "dpda/share.hpp"
#include "json.hpp"

using namespace dpda;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DPDA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dpda_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults resolve") {
  const RunConfig r = resolve(Config::defaults());
  CHECK(r.seed == 7);
  CHECK(r.data.n_classes == 4);
  CHECK(r.adapt.temperature == 20.0);
  CHECK(r.share.k == 6);
  CHECK(r.paths.source == "run/source.csv");
  CHECK(r.attack.epsilons.size() == 3);
  CHECK(std::isinf(r.attack.epsilons[0]));
  CHECK(r.pretrain.model.encoder_hidden == std::vector<std::size_t>{64, 32});
}

TEST_CASE("text merge with sections, comments and types") {
  Config c = Config::defaults();
  c.merge_text(
      "# comment\n"
      "[adapt]\n"
      "steps: int = 250\n"
      "method = dann\n"
      "\n"
      "[data]\n"
      "rotation_deg = 45.5\n"
      "translation: floats = 1,2\n",
      "test.ini");
  CHECK(c.get_int("adapt.steps") == 250);
  CHECK(c.get_string("adapt.method") == "dann");
  CHECK(c.get_float("data.rotation_deg") == 45.5);
  CHECK(c.get_floats("data.translation") == std::vector<double>{1, 2});
}

TEST_CASE("unknown keys and bad values name the key") {
  Config c = Config::defaults();
  try {
    c.merge_text("[adapt]\nstepz = 3\n", "x.ini");
    FAIL("expected error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("adapt.stepz") != std::string::npos);
  }
  CHECK_THROWS_AS(c.merge_text("[nosuch]\n", "x.ini"), ConfigError);
  CHECK_THROWS_AS(c.merge_text("[adapt]\nsteps: float = 3\n", "x.ini"), ConfigError);
  CHECK_THROWS_AS(c.merge_text("[adapt]\nsteps = many\n", "x.ini"), ConfigError);
  CHECK_THROWS_AS(c.merge_text("steps = 3\n", "x.ini"), ParseError);
  CHECK_THROWS_AS(c.merge_text("[adapt\n", "x.ini"), ParseError);
  CHECK_THROWS_AS(c.merge_text("[adapt]\njunk\n", "x.ini"), ParseError);
  CHECK_THROWS_AS(c.apply_override("adapt.steps"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("adapt.nope=1"), ConfigError);
}

TEST_CASE("overrides, resolved text and digest") {
  Config a = Config::defaults();
  Config b = Config::defaults();
  CHECK(a.digest() == b.digest());
  b.apply_override("share.k=3");
  CHECK(b.get_size("share.k") == 3);
  CHECK(a.digest() != b.digest());
  CHECK(b.resolved_text().find("k: int = 3") != std::string::npos);
  // The resolved text parses back to the same configuration.
  Config c = Config::defaults();
  c.merge_text(b.resolved_text(), "resolved");
  CHECK(c.digest() == b.digest());
  c.apply_override("run.out_dir=elsewhere");
  c.apply_override("run.threads=8");
  c.apply_override("paths.share=x.json");
  CHECK(c.digest() == b.digest());
  c.apply_override("run.seed=99");
  CHECK(c.digest() != b.digest());
}

TEST_CASE("resolve validates values") {
  for (const char* bad : {"run.threads=0", "adapt.method=mmd", "data.label_mode=soft",
                          "share.k=0", "adapt.conditioning=sum", "pretrain.steps=-1"}) {
    Config c = Config::defaults();
    INFO(bad);
    CHECK_THROWS_AS((c.apply_override(bad), resolve(c)), ConfigError);
  }
}

TEST_CASE("stage seeds derive from the run seed") {
  Config c = Config::defaults();
  c.apply_override("run.seed=11");
  const RunConfig a = resolve(c);
  c.apply_override("run.seed=12");
  const RunConfig b = resolve(c);
  CHECK(a.data.seed != b.data.seed);
  CHECK(a.adapt.seed != b.adapt.seed);
  CHECK(a.data.seed != a.adapt.seed);
}

}  // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("accountant prints a privacy report") {
  const fs::path dir = scratch("acct");
  const std::string out = (dir / "out").string();
  CHECK(run_cli("accountant --q 1 --sigma 1 --steps 1 --delta 0.36787944117144233 "
                "--orders 2 --set run.out_dir=" + out) == 0);
  const auto j = nlohmann::json::parse(read_text_file(out + "/privacy_report.json"));
  CHECK(j["epsilon"].get<double>() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fs::exists(out + "/config.resolved.ini"));
  CHECK(fs::exists(out + "/VERSION"));
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("codes");
  CHECK(run_cli("accountant --set adapt.bogus=1 --set run.out_dir=" + dir.string()) == 2);
  CHECK(run_cli("nosuchcommand") == 2);
  CHECK(run_cli("evaluate --set run.out_dir=" + (dir / "missing").string()) == 2);
  const std::string corrupt = (dir / "corrupt.json").string();
  write_text_file(corrupt, "{not json");
  CHECK(run_cli("evaluate --set run.out_dir=" + dir.string() + " --set paths.share=" + corrupt) ==
        3);
}

TEST_CASE("scripted pipeline") {
  const fs::path dir = scratch("pipeline");
  const fs::path cfg = dir / "run.ini";
  write_text_file(cfg.string(),
                  "[run]\nseed = 3\nout_dir = " + (dir / "out").string() +
                      "\n[data]\nsamples_per_class = 40\ndim = 6\n"
                      "[model]\nencoder_hidden = 8\nfeature_dim = 4\n"
                      "[pretrain]\nsteps = 40\nlearning_rate = 0.01\n"
                      "[dp]\nenabled = true\ntarget_epsilon = 5\n"
                      "[share]\nk = 2\n[adapt]\nsteps = 10\n"
                      "[evaluate]\nembeddings = pca2\n");
  const std::string c = "--config " + cfg.string();
  for (const char* stage : {"gen-data", "pretrain", "share", "adapt", "evaluate"}) {
    INFO(stage);
    REQUIRE(run_cli(std::string(stage) + " " + c) == 0);
  }
  const fs::path out = dir / "out";
  for (const char* f : {"source.csv", "target.csv", "model.json", "share.json",
                        "target_encoder.json", "train_log.csv", "ledger.json",
                        "adapt_log.csv", "metrics.csv", "embeddings.csv"}) {
    CHECK(fs::exists(out / f));
  }
  const SharePackage pkg = load_share((out / "share.json").string());
  REQUIRE(pkg.privacy.has_value());
  CHECK(pkg.privacy->epsilon <= 5.0);
  const std::string metrics = read_text_file((out / "metrics.csv").string());
  CHECK(metrics.rfind("class,precision,recall,f1,support\n", 0) == 0);

  REQUIRE(run_cli("evaluate " + c + " --threads 3 --set run.out_dir=" + (dir / "t3").string() +
                  " --set paths.share=" + (out / "share.json").string() +
                  " --set paths.target=" + (out / "target.csv").string() +
                  " --set paths.target_encoder=" + (out / "target_encoder.json").string()) == 0);
  CHECK(read_text_file((dir / "t3" / "metrics.csv").string()) == metrics);
}

}  // TEST_SUITE
