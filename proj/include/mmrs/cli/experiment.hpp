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

// Experiment runner: load, split, train, evaluate, write artifacts.

#pragma once

#include "mmrs/cli/config.hpp"
#include "mmrs/eval.hpp"
#include "mmrs/ingest.hpp"
#include "mmrs/model_train.hpp"
#include "mmrs/modality_graph.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace mmrs {

struct Dataset {
  InteractionSet interactions;
  std::vector<ModalityFeatures> features;  // aligned to interactions.items
};

inline Dataset load_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  Dataset d;
  d.interactions = load_interactions(cfg.interactions, cfg.format);
  if (cfg.mode == ModelKind::Mf) return d;
  FeatureLoadOptions opts;
  opts.max_missing = cfg.max_missing;
  for (const auto& [id, path] : cfg.features)
    d.features.push_back(load_modality_features(path, id, &d.interactions.items, opts));
  return d;
}

inline SplitBundle make_splits(const ExperimentConfig& cfg, const InteractionSet& interactions) {
  if (cfg.cold_threshold > 0) return cold_start_split(interactions, cfg.cold_threshold, cfg.split_seed, cfg.ratios);
  return split_dataset(interactions, cfg.ratios, cfg.split_seed);
}

/// The configured model over a loaded dataset.
using AnyModel = std::variant<MatrixFactorization, GraphRecommender>;

inline AnyModel make_model(const ExperimentConfig& cfg, const Dataset& data) {
  if (cfg.mode == ModelKind::Mf) return MatrixFactorization{};
  return GraphRecommender(data.features, cfg.graph, cfg.conv);
}

struct RunResult {
  TrainedModel trained;
  EvalReport report;
};

/// Train and evaluate in memory.
inline RunResult run_pipeline(const ExperimentConfig& cfg, const Dataset& data, const SplitBundle& splits) {
  cfg.validate();
  AnyModel model = make_model(cfg, data);
  return std::visit(
      [&](auto& m) {
        RunResult r;
        r.trained = train(m, splits, cfg.train);
        r.report = evaluate_all_ranking(r.trained.params.user_emb, m.item_representations(r.trained.params), splits,
                                        cfg.eval);
        return r;
      },
      model);
}

inline std::vector<std::string> modality_ids(const ExperimentConfig& cfg) {
  std::vector<std::string> ids;
  if (cfg.mode == ModelKind::Mmrs)
    for (const auto& [id, path] : cfg.features) ids.push_back(id);
  return ids;
}

namespace detail {

inline std::filesystem::path prepare_out_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) input_error(kCli, "cannot create output directory '" + out_dir + "': " + ec.message());
  return std::filesystem::path(out_dir);
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  io::write_file((dir / "report.json").string(), report.to_json(), kCli);
  io::write_file((dir / "report.csv").string(), report.to_csv(), kCli);
}

}  // namespace detail

/// Full run. Writes into `out_dir`: checkpoint.mmck, history.csv,
/// report.json, report.csv and manifest.json (config, seeds, config hash,
/// library version, output checksums). Nothing in these files depends on
/// wall-clock time, so a rerun with the same manifest reproduces them.
inline RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  const Dataset data = load_dataset(cfg);
  const SplitBundle splits = make_splits(cfg, data.interactions);
  RunResult result = run_pipeline(cfg, data, splits);
  const auto dir = detail::prepare_out_dir(out_dir);

  Checkpoint ck;
  ck.params = result.trained.params;
  ck.config = config_to_ini(cfg);
  ck.seed = cfg.train.seed;
  ck.rng_state = result.trained.rng_state;
  ck.modality_ids = modality_ids(cfg);
  const std::string ck_bytes = encode_checkpoint(ck);
  io::write_file((dir / "checkpoint.mmck").string(), ck_bytes, kCli);
  const std::string history = result.trained.history.to_csv();
  io::write_file((dir / "history.csv").string(), history, kCli);
  detail::write_report(result.report, dir);

  nlohmann::ordered_json m;
  m["library"] = "mmrs";
  m["version"] = std::string(kVersion);
  m["mode"] = cfg.mode == ModelKind::Mmrs ? "mmrs" : "mf";
  m["seed"] = cfg.train.seed;
  m["split_seed"] = cfg.split_seed;
  m["eval_seed"] = cfg.eval.seed;
  m["config_hash"] = config_hash(cfg);
  m["threads"] = thread_count();
  m["epochs_run"] = result.trained.history.epochs.size();
  m["best_epoch"] = result.trained.history.best_epoch;
  m["early_stopped"] = result.trained.history.early_stopped;
  m["outputs"] = {{"checkpoint.mmck", detail::hex64(fnv1a64(ck_bytes))},
                  {"history.csv", detail::hex64(fnv1a64(history))},
                  {"report.json", detail::hex64(fnv1a64(result.report.to_json()))},
                  {"report.csv", detail::hex64(fnv1a64(result.report.to_csv()))}};
  m["config"] = config_to_ini(cfg);
  io::write_file((dir / "manifest.json").string(), m.dump(2) + "\n", kCli);
  return result;
}

/// Re-evaluates a saved checkpoint on the splits its config describes.
inline EvalReport evaluate_checkpoint(const ExperimentConfig& cfg, const Checkpoint& ck) {
  const Dataset data = load_dataset(cfg);
  const SplitBundle splits = make_splits(cfg, data.interactions);
  AnyModel model = make_model(cfg, data);
  return std::visit(
      [&](auto& m) {
        std::mt19937_64 rng(cfg.train.seed);
        check_checkpoint_shape(ck.params, m.init_params(splits.train.n_users, splits.train.n_items, cfg.train, rng));
        return evaluate_all_ranking(ck.params.user_emb, m.item_representations(ck.params), splits, cfg.eval);
      },
      model);
}

/// Writes the split files, index maps, initial modality graphs and a
/// summary.json for inspection.
inline nlohmann::ordered_json prepare_dataset(const ExperimentConfig& cfg, const std::string& out_dir) {
  const Dataset data = load_dataset(cfg);
  const SplitBundle splits = make_splits(cfg, data.interactions);
  const auto dir = detail::prepare_out_dir(out_dir);
  write_interactions(splits.train, (dir / "train.csv").string());
  write_interactions(splits.validation, (dir / "validation.csv").string());
  write_interactions(splits.test, (dir / "test.csv").string());
  write_index_map(data.interactions.users, (dir / "users.csv").string());
  write_index_map(data.interactions.items, (dir / "items.csv").string());

  nlohmann::ordered_json s;
  s["n_users"] = data.interactions.n_users;
  s["n_items"] = data.interactions.n_items;
  s["n_interactions"] = data.interactions.records.size();
  s["train"] = splits.train.records.size();
  s["validation"] = splits.validation.records.size();
  s["test"] = splits.test.records.size();
  s["cold_threshold"] = splits.cold_threshold;
  s["cold_users"] = splits.cold_user_ids.size();
  s["cold_items"] = splits.cold_item_ids.size();
  s["modalities"] = nlohmann::ordered_json::array();
  for (const auto& f : data.features) {
    s["modalities"].push_back({{"id", f.modality_id}, {"dim", f.dim()}, {"missing_rows", f.missing_rows}});
    if (cfg.graph.k >= f.n_items()) continue;
    const auto g = normalize_adjacency(build_knn_graph(f, cfg.graph.k, cfg.graph.chunk_rows));
    write_graph(g, {f.n_items(), cfg.graph.k, cfg.graph.sigma, f.modality_id},
                (dir / ("graph_" + f.modality_id + ".csv")).string());
  }
  io::write_file((dir / "summary.json").string(), s.dump(2) + "\n", kCli);
  return s;
}

// ---------------------------------------------------------------------------
// Neighbor-count sweep

inline constexpr std::size_t kSweepCutoff = 20;

struct SweepRow {
  std::size_t k = 0;
  RankMetrics metrics;  // all users, cutoff kSweepCutoff
};

/// Retrains from scratch for every k (same seeds otherwise).
inline std::vector<SweepRow> sweep_k(const ExperimentConfig& cfg, const Dataset& data, const SplitBundle& splits,
                                     const std::vector<std::size_t>& k_values) {
  if (cfg.mode != ModelKind::Mmrs || !cfg.conv.enhance)
    config_error(kCli, "sweep-k needs mode=mmrs with the graph enabled");
  if (k_values.empty()) config_error(kCli, "sweep-k needs at least one k");
  for (std::size_t k : k_values)
    if (k < 1 || k >= data.interactions.n_items)
      config_error(kCli, "sweep-k: k=" + std::to_string(k) + " outside [1, n_items)");
  std::vector<SweepRow> rows;
  for (std::size_t k : k_values) {
    ExperimentConfig c = cfg;
    c.graph.k = k;
    c.eval.ks = {kSweepCutoff};
    const auto r = run_pipeline(c, data, splits);
    rows.push_back({k, r.report.segment(Segment::All)->at_k.at(kSweepCutoff)});
  }
  return rows;
}

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  const std::string at = "@" + std::to_string(kSweepCutoff);
  std::string out = "k,ndcg" + at + ",recall" + at + ",precision" + at + ",map" + at + "\n";
  for (const auto& r : rows)
    out += std::to_string(r.k) + "," + io::format_double(r.metrics.ndcg) + "," + io::format_double(r.metrics.recall) +
           "," + io::format_double(r.metrics.precision) + "," + io::format_double(r.metrics.map) + "\n";
  return out;
}

}  // namespace mmrs
