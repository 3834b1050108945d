/*
 * Copyright 2026 The mmrs Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mmrs/mmrs.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <sys/wait.h>

namespace mmrs {
namespace {

using testing::expect_error;
using testing::TempDir;

TEST(Ini, ParsesSectionsAndComments) {
  const auto e = parse_ini("# top\n[a]\nx = 1\n\n[b]\ny=two words\n; note\n");
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0], (std::pair<std::string, std::string>{"a.x", "1"}));
  EXPECT_EQ(e[1], (std::pair<std::string, std::string>{"b.y", "two words"}));
}

TEST(Ini, Errors) {
  expect_error([] { parse_ini("[a\nx=1\n"); }, ErrorKind::Config, "line 1: malformed section header");
  expect_error([] { parse_ini("[a]\nnoequals\n"); }, ErrorKind::Config, "line 2: expected key = value");
  expect_error([] { parse_ini("x=1\n"); }, ErrorKind::Config, "key outside of a section");
  expect_error([] { parse_ini("[a]\nx=1\nx=2\n"); }, ErrorKind::Config, "duplicate key 'a.x'");
}

TEST(Ini, OverridesReplaceOrAppend) {
  auto e = parse_ini("[model_train]\ndim = 8\n");
  apply_override(e, "model_train.dim=16");
  apply_override(e, "eval.ks=5,10");
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].second, "16");
  EXPECT_EQ(e[1].first, "eval.ks");
  expect_error([&] { apply_override(e, "nodot=1"); }, ErrorKind::Config, "section.key=value");
  expect_error([&] { apply_override(e, "a.b"); }, ErrorKind::Config, "section.key=value");
}

constexpr const char* kBaseIni =
    "[data]\ninteractions = data.csv\n[features]\nimg = img.csv\n"
    "[modality_graph]\nk = 7\nsigma = 0.4\n[model_train]\noptimizer = sgd\n[eval]\nks = 3,9\n";

TEST(Config, ParsesAndResolvesPaths) {
  const auto c = config_from_entries(parse_ini(kBaseIni), "/data/root");
  EXPECT_EQ(c.interactions, "/data/root/data.csv");
  ASSERT_EQ(c.features.size(), 1u);
  EXPECT_EQ(c.features[0].first, "img");
  EXPECT_EQ(c.features[0].second, "/data/root/img.csv");
  EXPECT_EQ(c.graph.k, 7u);
  EXPECT_DOUBLE_EQ(c.graph.sigma, 0.4);
  EXPECT_EQ(c.train.optimizer, OptimizerKind::Sgd);
  EXPECT_EQ(c.eval.ks, (std::vector<std::size_t>{3, 9}));
}

TEST(Config, RejectsBadValues) {
  const auto with = [](const std::string& extra) {
    auto e = parse_ini(kBaseIni);
    apply_override(e, extra);
    return config_from_entries(e, "/r");
  };
  expect_error([&] { with("model_train.dim=abc"); }, ErrorKind::Config, "model_train.dim");
  expect_error([&] { with("model_train.optimizer=rmsprop"); }, ErrorKind::Config, "expected one of");
  expect_error([&] { with("modality_graph.learned_graph=maybe"); }, ErrorKind::Config, "expected a boolean");
  expect_error([&] { with("model_train.bogus=1"); }, ErrorKind::Config, "unknown config key 'model_train.bogus'");
  expect_error([&] { with("model_train.learning_rate=nan"); }, ErrorKind::Config, "learning_rate");
}

TEST(Config, CanonicalTextRoundTripsAndHashes) {
  const auto c = config_from_entries(parse_ini(kBaseIni), "/r");
  const std::string text = config_to_ini(c);
  const auto back = config_from_entries(parse_ini(text), "/elsewhere");
  EXPECT_EQ(config_to_ini(back), text);
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
  auto e = parse_ini(kBaseIni);
  apply_override(e, "model_train.seed=5");
  EXPECT_NE(config_hash(config_from_entries(e, "/r")), config_hash(c));
}

// A small synthetic dataset on disk plus its config.
struct Fixture {
  TempDir tmp;
  std::string config;
  Fixture(std::size_t cold_threshold = 6) {
    SyntheticSpec spec;
    spec.n_users = 120;
    spec.n_items = 60;
    spec.blocks = 4;
    spec.seed = 3;
    write_synthetic(make_synthetic(spec), tmp.file("data"), cold_threshold);
    config = tmp.file("data/config.ini");
  }
  std::vector<std::string> quick(std::vector<std::string> extra = {}) const {
    std::vector<std::string> o{"model_train.epochs=4", "model_train.dim=8", "model_train.learning_rate=0.01",
                               "modality_graph.k=5", "eval.ks=5,10"};
    o.insert(o.end(), extra.begin(), extra.end());
    return o;
  }
};

TEST(Experiment, WritesArtifactsAndReproduces) {
  Fixture f;
  const auto cfg = load_config(f.config, f.quick());
  const auto r = run_experiment(cfg, f.tmp.file("run1"));
  for (const char* name : {"checkpoint.mmck", "history.csv", "report.json", "report.csv", "manifest.json"})
    EXPECT_TRUE(std::filesystem::exists(f.tmp.file(std::string("run1/") + name))) << name;
  EXPECT_EQ(r.trained.history.epochs.size(), 4u);
  const auto report = nlohmann::json::parse(io::read_file(f.tmp.file("run1/report.json"), "test"));
  ASSERT_EQ(report["segments"].size(), 3u);  // all, warm, cold
  EXPECT_EQ(report["segments"][2]["segment"], "cold");

  // Rerun from the manifest into a second directory.
  const auto again = load_config(f.tmp.file("run1/manifest.json"));
  run_experiment(again, f.tmp.file("run2"));
  for (const char* name : {"history.csv", "report.json", "report.csv", "checkpoint.mmck", "manifest.json"})
    EXPECT_EQ(io::read_file(f.tmp.file(std::string("run1/") + name), "test"),
              io::read_file(f.tmp.file(std::string("run2/") + name), "test"))
        << name;
}

TEST(Experiment, CheckpointEvaluatesToSameReport) {
  Fixture f;
  const auto cfg = load_config(f.config, f.quick());
  const auto r = run_experiment(cfg, f.tmp.file("run"));
  const auto ck = load_checkpoint(f.tmp.file("run/checkpoint.mmck"));
  EXPECT_EQ(evaluate_checkpoint(cfg, ck).to_json(), r.report.to_json());
  // A config describing a different model shape is rejected.
  const auto other = load_config(f.config, f.quick({"model_train.dim=4"}));
  expect_error([&] { evaluate_checkpoint(other, ck); }, ErrorKind::Config, "checkpoint shape mismatch");
}

TEST(Experiment, MfModeNeedsNoFeatures) {
  Fixture f;
  auto cfg = load_config(f.config, f.quick({"model_train.mode=mf"}));
  cfg.features.clear();
  const auto r = run_experiment(cfg, f.tmp.file("mf"));
  EXPECT_NE(r.report.segment(Segment::All), nullptr);
  const auto m = nlohmann::json::parse(io::read_file(f.tmp.file("mf/manifest.json"), "test"));
  EXPECT_EQ(m["mode"], "mf");
}

TEST(Experiment, MissingFeatureFileIsInputError) {
  Fixture f;
  auto cfg = load_config(f.config, f.quick());
  cfg.features[0].second = f.tmp.file("data/nope.mmfv");
  expect_error([&] { run_experiment(cfg, f.tmp.file("x")); }, ErrorKind::Input, "nope.mmfv");
}

TEST(Experiment, PrepareWritesSplitsAndGraphs) {
  Fixture f;
  const auto s = prepare_dataset(load_config(f.config, f.quick()), f.tmp.file("prep"));
  EXPECT_EQ(s["n_users"], 120);
  EXPECT_EQ(s["n_items"], 60);
  EXPECT_EQ(s["train"].get<std::size_t>() + s["validation"].get<std::size_t>() + s["test"].get<std::size_t>(),
            s["n_interactions"].get<std::size_t>());
  for (const char* name : {"train.csv", "validation.csv", "test.csv", "users.csv", "items.csv", "graph_m0.csv"})
    EXPECT_TRUE(std::filesystem::exists(f.tmp.file(std::string("prep/") + name))) << name;
}

TEST(Sweep, SingleKMatchesPlainRun) {
  Fixture f;
  const auto cfg = load_config(f.config, f.quick({"eval.ks=20", "modality_graph.k=10"}));
  const Dataset data = load_dataset(cfg);
  const SplitBundle splits = make_splits(cfg, data.interactions);
  const auto rows = sweep_k(cfg, data, splits, {10});
  const auto plain = run_pipeline(cfg, data, splits);
  ASSERT_EQ(rows.size(), 1u);
  const auto& m = plain.report.segment(Segment::All)->at_k.at(20);
  EXPECT_EQ(rows[0].metrics.ndcg, m.ndcg);
  EXPECT_EQ(rows[0].metrics.recall, m.recall);
  EXPECT_EQ(io::lines(sweep_to_csv(rows))[0], "k,ndcg@20,recall@20,precision@20,map@20");
  expect_error([&] { sweep_k(cfg, data, splits, {60}); }, ErrorKind::Config, "outside [1, n_items)");
}

TEST(Synthetic, DeterministicAndBlockStructured) {
  SyntheticSpec spec;
  spec.n_users = 50;
  spec.n_items = 30;
  spec.blocks = 3;
  const auto a = make_synthetic(spec), b = make_synthetic(spec);
  EXPECT_EQ(a.interactions, b.interactions);
  EXPECT_EQ(a.features[0].values, b.features[0].values);
  std::vector<bool> seen(30, false);
  for (const auto& r : a.interactions.records) seen[r.item] = true;
  EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](bool s) { return s; }));
  spec.blocks = 40;
  expect_error([&] { make_synthetic(spec); }, ErrorKind::Config, "two items per block");
}

// -- the executable ---------------------------------------------------------

struct Run {
  int code;
  std::string output;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(MMRS_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

TEST(Executable, ExitCodes) {
  TempDir tmp;
  const std::string data = tmp.file("d");
  auto r = run_cli("synth --users 80 --items 40 --blocks 4 --out " + data);
  ASSERT_EQ(r.code, 0) << r.output;

  const std::string quick = " --set model_train.epochs=2 --set modality_graph.k=4 --set model_train.dim=4";
  r = run_cli("train -c " + data + "/config.ini" + quick + " --out " + tmp.file("run"));
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(std::filesystem::exists(tmp.file("run/manifest.json")));

  r = run_cli("evaluate --checkpoint " + tmp.file("run/checkpoint.mmck") + " --out " + tmp.file("ev"));
  EXPECT_EQ(r.code, 0) << r.output;

  r = run_cli("train -c " + data + "/config.ini --set features.m0=" + tmp.file("missing.mmfv") + quick + " --out " +
              tmp.file("bad"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("missing.mmfv"), std::string::npos) << r.output;

  r = run_cli("train -c " + data + "/config.ini --set nodot --out " + tmp.file("bad2"));
  EXPECT_EQ(r.code, 2);
  r = run_cli("train -c " + data + "/config.ini --set model_train.epochs=x --out " + tmp.file("bad3"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("model_train.epochs"), std::string::npos);

  r = run_cli("frobnicate");
  EXPECT_EQ(r.code, 2);
  r = run_cli("--version");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find(kVersion), std::string::npos);
}

TEST(Executable, DivergenceExitsWithRuntimeCode) {
  TempDir tmp;
  ASSERT_EQ(run_cli("synth --users 40 --items 40 --blocks 2 --out " + tmp.file("d")).code, 0);
  const auto r = run_cli("train -c " + tmp.file("d/config.ini") +
                         " --set model_train.init_scale=1e160 --set modality_graph.k=3 --out " + tmp.file("run"));
  EXPECT_EQ(r.code, 1) << r.output;
}

}  // namespace
}  // namespace mmrs
