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

// mmrs command-line tool.
//
// Exit status: 0 success, 1 runtime failure (e.g. training diverged),
// 2 bad configuration, arguments or unreadable/malformed input files.

#include "mmrs/mmrs.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
  auto* opt = cmd->add_option("-c,--config", c.config, "Experiment config (.ini, or a run manifest.json)");
  if (config_required) opt->required();
  cmd->add_option("--set", c.overrides, "Override a config key: section.key=value (repeatable)");
  cmd->add_option("-o,--out", c.out, "Output directory")->required();
}

void print_summary(const mmrs::EvalReport& report) {
  for (const auto& s : report.segments) {
    std::printf("%-5s users=%zu mae=%.4f rmse=%.4f\n", std::string(mmrs::to_string(s.segment)).c_str(), s.n_users,
                s.mae, s.rmse);
    for (const auto& [k, m] : s.at_k)
      std::printf("      @%-3zu precision=%.4f recall=%.4f ndcg=%.4f map=%.4f\n", k, m.precision, m.recall, m.ndcg,
                  m.map);
  }
  for (const auto& w : report.warnings) std::printf("note: %s\n", w.c_str());
}

int run(int argc, char** argv) {
  CLI::App app{"Multi-modal item-graph recommender"};
  app.set_version_flag("--version", std::string(mmrs::kVersion));
  app.require_subcommand(1);

  Common prep, tr, ev, sw;
  auto* prepare = app.add_subcommand("prepare", "Load and split a dataset; export splits and item graphs");
  add_common(prepare, prep);

  auto* train = app.add_subcommand("train", "Train, evaluate and write checkpoint, history, report, manifest");
  add_common(train, tr);

  std::string checkpoint;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a saved checkpoint");
  add_common(evaluate, ev, false);
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

  std::vector<std::size_t> k_values{1, 2, 5, 10, 20, 50, 100};
  auto* sweep = app.add_subcommand("sweep-k", "Retrain for each neighbor count k and tabulate metrics@20");
  add_common(sweep, sw);
  sweep->add_option("--k", k_values, "Neighbor counts (values >= n_items are dropped)")->delimiter(',');

  mmrs::SyntheticSpec spec;
  std::string synth_out;
  std::size_t synth_cold = 6;
  auto* synth = app.add_subcommand("synth", "Generate a block-structured synthetic dataset");
  synth->add_option("-o,--out", synth_out, "Output directory")->required();
  synth->add_option("--users", spec.n_users, "Number of users")->capture_default_str();
  synth->add_option("--items", spec.n_items, "Number of items")->capture_default_str();
  synth->add_option("--blocks", spec.blocks, "Number of item/user blocks")->capture_default_str();
  synth->add_option("--modalities", spec.modalities, "Number of feature modalities")->capture_default_str();
  synth->add_option("--dim", spec.feature_dim, "Feature dimension")->capture_default_str();
  synth->add_option("--noise", spec.noise, "Feature noise in [0, 1]")->capture_default_str();
  synth->add_option("--off-block", spec.off_block, "Share of interactions outside the user's block")
      ->capture_default_str();
  synth->add_option("--sparse-fraction", spec.sparse_fraction, "Share of sparse users")->capture_default_str();
  synth->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
  synth->add_option("--cold-threshold", synth_cold, "cold_threshold written into config.ini")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*prepare) {
    const auto cfg = mmrs::load_config(prep.config, prep.overrides);
    const auto summary = mmrs::prepare_dataset(cfg, prep.out);
    std::cout << summary.dump(2) << "\n";
  } else if (*train) {
    const auto cfg = mmrs::load_config(tr.config, tr.overrides);
    const auto result = mmrs::run_experiment(cfg, tr.out);
    const auto& h = result.trained.history;
    std::printf("epochs run: %zu, best epoch: %zu%s\n", h.epochs.size(), h.best_epoch,
                h.early_stopped ? " (early stop)" : "");
    print_summary(result.report);
  } else if (*evaluate) {
    const auto ck = mmrs::load_checkpoint(checkpoint);
    mmrs::ExperimentConfig cfg;
    if (ev.config.empty()) {
      auto entries = mmrs::parse_ini(ck.config, "checkpoint config");
      for (const auto& o : ev.overrides) mmrs::apply_override(entries, o);
      cfg = mmrs::config_from_entries(entries);
    } else {
      cfg = mmrs::load_config(ev.config, ev.overrides);
    }
    const auto report = mmrs::evaluate_checkpoint(cfg, ck);
    std::error_code ec;
    std::filesystem::create_directories(ev.out, ec);
    if (ec) mmrs::input_error(mmrs::kCli, "cannot create output directory '" + ev.out + "'");
    mmrs::io::write_file((std::filesystem::path(ev.out) / "report.json").string(), report.to_json(), mmrs::kCli);
    mmrs::io::write_file((std::filesystem::path(ev.out) / "report.csv").string(), report.to_csv(), mmrs::kCli);
    print_summary(report);
  } else if (*sweep) {
    const auto cfg = mmrs::load_config(sw.config, sw.overrides);
    const auto data = mmrs::load_dataset(cfg);
    const auto splits = mmrs::make_splits(cfg, data.interactions);
    std::vector<std::size_t> ks;
    for (std::size_t k : k_values)
      if (k < data.interactions.n_items) ks.push_back(k);
    const auto rows = mmrs::sweep_k(cfg, data, splits, ks);
    std::error_code ec;
    std::filesystem::create_directories(sw.out, ec);
    if (ec) mmrs::input_error(mmrs::kCli, "cannot create output directory '" + sw.out + "'");
    const std::string csv = mmrs::sweep_to_csv(rows);
    mmrs::io::write_file((std::filesystem::path(sw.out) / "sweep_k.csv").string(), csv, mmrs::kCli);
    std::cout << csv;
  } else if (*synth) {
    const auto data = mmrs::make_synthetic(spec);
    mmrs::write_synthetic(data, synth_out, synth_cold);
    std::printf("wrote %zu users, %zu items, %zu interactions, %zu modalities to %s\n", data.interactions.n_users,
                data.interactions.n_items, data.interactions.records.size(), data.features.size(), synth_out.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mmrs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == mmrs::ErrorKind::Runtime ? kExitRuntime : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
