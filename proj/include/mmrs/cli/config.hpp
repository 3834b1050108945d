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

// Experiment configuration: a flat INI file with one section per module.
//
//   [data]          interactions, format (csv | events)
//   [features]      <modality id> = <feature file>, in declaration order
//   [ingest]        train_ratio, validation_ratio, test_ratio, split_seed,
//                   cold_threshold, max_missing
//   [modality_graph] k, sigma, chunk_rows, learned_graph, relearn_every,
//                   transform_dim, rounds
//   [fusion_conv]   n_layers, enhance
//   [model_train]   mode (mmrs | mf), dim, learning_rate, batch_size, epochs,
//                   l2_reg, seed, negatives_per_positive, optimizer (adam | sgd),
//                   patience, init_scale, eval_k
//   [eval]          ks, seed, mask_validation, target (test | validation)
//
// '#' or ';' starts a comment line. Relative paths resolve against the
// directory of the config file.

#pragma once

#include "mmrs/core.hpp"
#include "mmrs/eval.hpp"
#include "mmrs/fusion_conv.hpp"
#include "mmrs/ingest.hpp"
#include "mmrs/io.hpp"
#include "mmrs/modality_graph.hpp"
#include "mmrs/model_train/params.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace mmrs {

inline constexpr std::string_view kCli = "cli";

/// Ordered `section.key` -> value entries.
using IniEntries = std::vector<std::pair<std::string, std::string>>;

inline IniEntries parse_ini(std::string_view text, const std::string& what = "config") {
  IniEntries out;
  std::string section;
  const auto lines = io::lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto line = io::trim(lines[ln]);
    const std::string where = what + " line " + std::to_string(ln + 1);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') config_error(kCli, where + ": malformed section header");
      section = std::string(io::trim(line.substr(1, line.size() - 2)));
      if (section.empty()) config_error(kCli, where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) config_error(kCli, where + ": expected key = value");
    if (section.empty()) config_error(kCli, where + ": key outside of a section");
    const std::string key = section + "." + std::string(io::trim(line.substr(0, eq)));
    if (key.size() == section.size() + 1) config_error(kCli, where + ": empty key");
    for (const auto& [k, v] : out)
      if (k == key) config_error(kCli, where + ": duplicate key '" + key + "'");
    out.emplace_back(key, std::string(io::trim(line.substr(eq + 1))));
  }
  return out;
}

/// Applies `section.key=value`; replaces an existing entry in place.
inline void apply_override(IniEntries& entries, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto key = eq == std::string_view::npos ? std::string_view{} : io::trim(assignment.substr(0, eq));
  if (key.empty() || key.find('.') == std::string_view::npos || key.front() == '.' || key.back() == '.')
    config_error(kCli, "override '" + std::string(assignment) + "' is not of the form section.key=value");
  const std::string value(io::trim(assignment.substr(eq + 1)));
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries.emplace_back(std::string(key), value);
}

enum class ModelKind { Mmrs, Mf };

struct ExperimentConfig {
  std::string interactions;
  InteractionFormat format = InteractionFormat::Csv;
  std::vector<std::pair<std::string, std::string>> features;  // (modality id, path)

  SplitRatios ratios;
  std::uint64_t split_seed = 1;
  std::size_t cold_threshold = 0;  // 0: no warm/cold segmentation
  std::size_t max_missing = std::numeric_limits<std::size_t>::max();

  GraphConfig graph;
  ConvConfig conv;
  ModelKind mode = ModelKind::Mmrs;
  TrainConfig train;
  EvalConfig eval;

  /// Cross-field checks that need no data.
  void validate() const {
    if (interactions.empty()) config_error(kCli, "data.interactions is not set");
    if (mode == ModelKind::Mmrs && conv.enhance && features.empty())
      config_error(kCli, "mode=mmrs needs at least one modality under [features]");
    if (eval.ks.empty()) config_error(kCli, "eval.ks must list at least one cutoff");
    conv.validate();
    train.validate();
  }
};

namespace detail {

inline std::string where_key(const std::string& key, const std::string& value) {
  return "'" + key + "' = '" + value + "'";
}

template <class T>
T parse_value(const std::string& key, const std::string& value) {
  if constexpr (std::is_same_v<T, bool>) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    config_error(kCli, where_key(key, value) + ": expected a boolean");
  } else {
    const auto v = io::parse_number<T>(value);
    if (!v) config_error(kCli, where_key(key, value) + ": expected a number");
    if constexpr (std::is_floating_point_v<T>)
      if (!std::isfinite(*v)) config_error(kCli, where_key(key, value) + ": expected a finite number");
    return *v;
  }
}

inline std::vector<std::size_t> parse_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  const auto fields = io::split_csv(value);
  if (!fields) config_error(kCli, where_key(key, value) + ": malformed list");
  for (const auto& f : *fields) out.push_back(parse_value<std::size_t>(key, f));
  return out;
}

inline std::string resolve_path(const std::string& value, const std::filesystem::path& base) {
  if (value.empty()) return value;
  std::filesystem::path p(value);
  if (!p.is_absolute()) p = base / p;
  return std::filesystem::absolute(p).lexically_normal().string();
}

inline std::string join_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

inline std::string bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace detail

/// Builds a config from entries; unknown keys are rejected.
inline ExperimentConfig config_from_entries(const IniEntries& entries, const std::filesystem::path& base_dir = {}) {
  using detail::parse_value;
  ExperimentConfig c;
  for (const auto& [key, value] : entries) {
    const auto dot = key.find('.');
    const std::string section = key.substr(0, dot), name = key.substr(dot + 1);
    const auto bad_choice = [&](const char* choices) {
      config_error(kCli, detail::where_key(key, value) + ": expected one of " + choices);
    };
    if (section == "features") {
      for (const auto& [id, path] : c.features)
        if (id == name) config_error(kCli, "duplicate modality '" + name + "'");
      c.features.emplace_back(name, detail::resolve_path(value, base_dir));
    } else if (key == "data.interactions") {
      c.interactions = detail::resolve_path(value, base_dir);
    } else if (key == "data.format") {
      if (value == "csv") c.format = InteractionFormat::Csv;
      else if (value == "events") c.format = InteractionFormat::EventLog;
      else bad_choice("csv, events");
    } else if (key == "ingest.train_ratio") {
      c.ratios.train = parse_value<double>(key, value);
    } else if (key == "ingest.validation_ratio") {
      c.ratios.validation = parse_value<double>(key, value);
    } else if (key == "ingest.test_ratio") {
      c.ratios.test = parse_value<double>(key, value);
    } else if (key == "ingest.split_seed") {
      c.split_seed = parse_value<std::uint64_t>(key, value);
    } else if (key == "ingest.cold_threshold") {
      c.cold_threshold = parse_value<std::size_t>(key, value);
    } else if (key == "ingest.max_missing") {
      c.max_missing = value == "unlimited" ? std::numeric_limits<std::size_t>::max()
                                           : parse_value<std::size_t>(key, value);
    } else if (key == "modality_graph.k") {
      c.graph.k = parse_value<std::size_t>(key, value);
    } else if (key == "modality_graph.sigma") {
      c.graph.sigma = parse_value<double>(key, value);
    } else if (key == "modality_graph.chunk_rows") {
      c.graph.chunk_rows = parse_value<std::size_t>(key, value);
    } else if (key == "modality_graph.learned_graph") {
      c.graph.learned_graph = parse_value<bool>(key, value);
    } else if (key == "modality_graph.relearn_every") {
      c.graph.relearn_every = parse_value<std::size_t>(key, value);
    } else if (key == "modality_graph.transform_dim") {
      c.graph.transform_dim = parse_value<std::size_t>(key, value);
    } else if (key == "modality_graph.rounds") {
      c.graph.rounds = parse_value<std::size_t>(key, value);
    } else if (key == "fusion_conv.n_layers") {
      c.conv.n_layers = parse_value<std::size_t>(key, value);
    } else if (key == "fusion_conv.enhance") {
      c.conv.enhance = parse_value<bool>(key, value);
    } else if (key == "model_train.mode") {
      if (value == "mmrs") c.mode = ModelKind::Mmrs;
      else if (value == "mf") c.mode = ModelKind::Mf;
      else bad_choice("mmrs, mf");
    } else if (key == "model_train.dim") {
      c.train.dim = parse_value<std::size_t>(key, value);
    } else if (key == "model_train.learning_rate") {
      c.train.learning_rate = parse_value<double>(key, value);
    } else if (key == "model_train.batch_size") {
      c.train.batch_size = parse_value<std::size_t>(key, value);
    } else if (key == "model_train.epochs") {
      c.train.epochs = parse_value<std::size_t>(key, value);
    } else if (key == "model_train.l2_reg") {
      c.train.l2_reg = parse_value<double>(key, value);
    } else if (key == "model_train.seed") {
      c.train.seed = parse_value<std::uint64_t>(key, value);
    } else if (key == "model_train.negatives_per_positive") {
      c.train.negatives_per_positive = parse_value<std::size_t>(key, value);
    } else if (key == "model_train.optimizer") {
      if (value == "adam") c.train.optimizer = OptimizerKind::Adam;
      else if (value == "sgd") c.train.optimizer = OptimizerKind::Sgd;
      else bad_choice("adam, sgd");
    } else if (key == "model_train.patience") {
      c.train.patience = parse_value<std::size_t>(key, value);
    } else if (key == "model_train.init_scale") {
      c.train.init_scale = parse_value<double>(key, value);
    } else if (key == "model_train.eval_k") {
      c.train.eval_k = parse_value<std::size_t>(key, value);
    } else if (key == "eval.ks") {
      c.eval.ks = detail::parse_list(key, value);
    } else if (key == "eval.seed") {
      c.eval.seed = parse_value<std::uint64_t>(key, value);
    } else if (key == "eval.mask_validation") {
      c.eval.mask_validation = parse_value<bool>(key, value);
    } else if (key == "eval.target") {
      if (value == "test") c.eval.target = EvalTarget::Test;
      else if (value == "validation") c.eval.target = EvalTarget::Validation;
      else bad_choice("test, validation");
    } else {
      config_error(kCli, "unknown config key '" + key + "'");
    }
  }
  return c;
}

/// Canonical text: every key, fixed order, shortest round-trip numbers.
inline std::string config_to_ini(const ExperimentConfig& c) {
  using io::format_double;
  using detail::bool_text;
  std::string s;
  const auto kv = [&s](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
  s += "[data]\n";
  kv("interactions", c.interactions);
  kv("format", c.format == InteractionFormat::Csv ? "csv" : "events");
  s += "\n[features]\n";
  for (const auto& [id, path] : c.features) kv(id, path);
  s += "\n[ingest]\n";
  kv("train_ratio", format_double(c.ratios.train));
  kv("validation_ratio", format_double(c.ratios.validation));
  kv("test_ratio", format_double(c.ratios.test));
  kv("split_seed", std::to_string(c.split_seed));
  kv("cold_threshold", std::to_string(c.cold_threshold));
  kv("max_missing", c.max_missing == std::numeric_limits<std::size_t>::max() ? "unlimited"
                                                                             : std::to_string(c.max_missing));
  s += "\n[modality_graph]\n";
  kv("k", std::to_string(c.graph.k));
  kv("sigma", format_double(c.graph.sigma));
  kv("chunk_rows", std::to_string(c.graph.chunk_rows));
  kv("learned_graph", bool_text(c.graph.learned_graph));
  kv("relearn_every", std::to_string(c.graph.relearn_every));
  kv("transform_dim", std::to_string(c.graph.transform_dim));
  kv("rounds", std::to_string(c.graph.rounds));
  s += "\n[fusion_conv]\n";
  kv("n_layers", std::to_string(c.conv.n_layers));
  kv("enhance", bool_text(c.conv.enhance));
  s += "\n[model_train]\n";
  kv("mode", c.mode == ModelKind::Mmrs ? "mmrs" : "mf");
  kv("dim", std::to_string(c.train.dim));
  kv("learning_rate", format_double(c.train.learning_rate));
  kv("batch_size", std::to_string(c.train.batch_size));
  kv("epochs", std::to_string(c.train.epochs));
  kv("l2_reg", format_double(c.train.l2_reg));
  kv("seed", std::to_string(c.train.seed));
  kv("negatives_per_positive", std::to_string(c.train.negatives_per_positive));
  kv("optimizer", c.train.optimizer == OptimizerKind::Adam ? "adam" : "sgd");
  kv("patience", std::to_string(c.train.patience));
  kv("init_scale", format_double(c.train.init_scale));
  kv("eval_k", std::to_string(c.train.eval_k));
  s += "\n[eval]\n";
  kv("ks", detail::join_list(c.eval.ks));
  kv("seed", std::to_string(c.eval.seed));
  kv("mask_validation", bool_text(c.eval.mask_validation));
  kv("target", c.eval.target == EvalTarget::Test ? "test" : "validation");
  return s;
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config_to_ini(c))));
  return buf;
}

/// Reads an INI config, or the config embedded in a run manifest (`.json`),
/// then applies `overrides` in order.
inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  const std::string text = io::read_file(path, kCli);
  std::string ini = text;
  std::filesystem::path base = std::filesystem::path(path).parent_path();
  if (std::filesystem::path(path).extension() == ".json") {
    try {
      ini = nlohmann::json::parse(text).at("config").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      input_error(kCli, "'" + path + "': not a run manifest (" + e.what() + ")");
    }
    base.clear();  // manifest paths are already resolved
  }
  auto entries = parse_ini(ini, "'" + path + "'");
  for (const auto& o : overrides) apply_override(entries, o);
  return config_from_entries(entries, base);
}

}  // namespace mmrs
