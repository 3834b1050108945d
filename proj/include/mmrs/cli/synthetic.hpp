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

// Block-structured synthetic datasets with known ground truth.
//
// Items are split into contiguous blocks and every user belongs to one block.
// Users mostly interact with items of their own block (popularity decays
// within a block); a share of users is sparse. Each modality gives every
// block a random centroid and item features are
//   x = (1 - noise) * centroid + noise * N(0, I),
// so noise = 0 makes blocks perfectly separable and noise = 1 makes features
// pure noise. Interactions and features use separate random streams: changing
// `noise` leaves the interactions untouched.

#pragma once

#include "mmrs/cli/config.hpp"
#include "mmrs/ingest.hpp"
#include "mmrs/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace mmrs {

struct SyntheticSpec {
  std::size_t n_users = 1000;
  std::size_t n_items = 500;
  std::size_t blocks = 10;
  std::size_t modalities = 2;
  std::size_t feature_dim = 16;
  double noise = 0.2;                // feature noise in [0, 1]
  double off_block = 0.05;           // chance that an interaction leaves the user's block
  double popularity_exponent = 0.5;  // within-block popularity ~ 1 / (rank + 1)^exponent
  std::size_t min_activity = 15;     // interactions per regular user, inclusive range
  std::size_t max_activity = 30;
  double sparse_fraction = 0.2;      // share of sparse users
  std::size_t sparse_min_activity = 5;
  std::size_t sparse_max_activity = 7;
  std::uint64_t seed = 1;

  std::size_t block_size(std::size_t b) const {
    return (b + 1) * n_items / blocks - b * n_items / blocks;
  }

  void validate() const {
    if (blocks < 1) config_error(kCli, "synthetic: blocks must be >= 1");
    if (n_items < 2 * blocks) config_error(kCli, "synthetic: need at least two items per block");
    if (n_users < blocks) config_error(kCli, "synthetic: need at least one user per block");
    if (modalities < 1 || feature_dim < 1) config_error(kCli, "synthetic: modalities and feature_dim must be >= 1");
    if (!(noise >= 0.0 && noise <= 1.0)) config_error(kCli, "synthetic: noise must lie in [0, 1]");
    if (!(off_block >= 0.0 && off_block <= 1.0)) config_error(kCli, "synthetic: off_block must lie in [0, 1]");
    if (!(sparse_fraction >= 0.0 && sparse_fraction <= 1.0))
      config_error(kCli, "synthetic: sparse_fraction must lie in [0, 1]");
    if (!(popularity_exponent >= 0.0)) config_error(kCli, "synthetic: popularity_exponent must be >= 0");
    if (min_activity < 1 || min_activity > max_activity || sparse_min_activity < 1 ||
        sparse_min_activity > sparse_max_activity)
      config_error(kCli, "synthetic: activity ranges must satisfy 1 <= min <= max");
    if (std::max(max_activity, sparse_max_activity) > n_items)
      config_error(kCli, "synthetic: activity cannot exceed n_items");
  }
};

struct SyntheticData {
  InteractionSet interactions;
  std::vector<ModalityFeatures> features;
  std::vector<std::size_t> item_block;  // ground-truth labels
  std::vector<std::size_t> user_block;
  std::vector<bool> sparse_user;
};

namespace detail {

inline std::vector<std::string> padded_ids(char prefix, std::size_t n) {
  const std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string num = std::to_string(i);
    ids[i] = prefix + std::string(width - num.size(), '0') + num;
  }
  return ids;
}

}  // namespace detail

inline SyntheticData make_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData d;
  d.item_block.resize(spec.n_items);
  std::vector<std::size_t> block_start(spec.blocks + 1);
  for (std::size_t b = 0; b <= spec.blocks; ++b) block_start[b] = b * spec.n_items / spec.blocks;
  for (std::size_t b = 0; b < spec.blocks; ++b)
    for (std::size_t i = block_start[b]; i < block_start[b + 1]; ++i) d.item_block[i] = b;

  // Interactions.
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  d.user_block.resize(spec.n_users);
  d.sparse_user.resize(spec.n_users);
  std::vector<std::vector<std::size_t>> chosen(spec.n_users);
  std::vector<std::size_t> item_count(spec.n_items, 0);
  std::vector<std::pair<double, std::size_t>> keys;
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    const std::size_t b = u % spec.blocks;
    d.user_block[u] = b;
    d.sparse_user[u] = unit(rng) < spec.sparse_fraction;
    const auto [lo, hi] = d.sparse_user[u] ? std::pair{spec.sparse_min_activity, spec.sparse_max_activity}
                                           : std::pair{spec.min_activity, spec.max_activity};
    const std::size_t n = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    std::size_t n_off = 0;
    for (std::size_t k = 0; k < n; ++k) n_off += unit(rng) < spec.off_block ? 1 : 0;
    const std::size_t size_b = block_start[b + 1] - block_start[b];
    std::size_t n_in = std::min(n - n_off, size_b);
    n_off = n - n_in;

    // Weighted sampling without replacement: largest u^(1/w) keys.
    keys.clear();
    for (std::size_t r = 0; r < size_b; ++r) {
      const double w = 1.0 / std::pow(static_cast<double>(r + 1), spec.popularity_exponent);
      keys.emplace_back(std::pow(unit(rng), 1.0 / w), block_start[b] + r);
    }
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n_in), keys.end(),
                      [](const auto& x, const auto& y) { return x.first > y.first || (x.first == y.first && x.second < y.second); });
    auto& items = chosen[u];
    for (std::size_t k = 0; k < n_in; ++k) items.push_back(keys[k].second);

    std::uniform_int_distribution<std::size_t> any(0, spec.n_items - 1);
    const std::size_t outside = spec.n_items - size_b;
    for (std::size_t k = 0; k < n_off && outside > 0; ++k) {
      std::size_t i;
      do i = any(rng);
      while (d.item_block[i] == b || std::find(items.begin(), items.end(), i) != items.end());
      items.push_back(i);
    }
    for (std::size_t i : items) ++item_count[i];
  }
  // Every item gets at least one interaction so the item index is complete.
  for (std::size_t i = 0; i < spec.n_items; ++i) {
    if (item_count[i] > 0) continue;
    const std::size_t b = d.item_block[i];
    const std::size_t per_block = (spec.n_users - b + spec.blocks - 1) / spec.blocks;
    std::size_t u = b + spec.blocks * std::uniform_int_distribution<std::size_t>(0, per_block - 1)(rng);
    chosen[u].push_back(i);
    ++item_count[i];
  }

  auto& set = d.interactions;
  set.n_users = spec.n_users;
  set.n_items = spec.n_items;
  set.users = IdMap::from_ids(detail::padded_ids('u', spec.n_users));
  set.items = IdMap::from_ids(detail::padded_ids('i', spec.n_items));
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    auto items = chosen[u];
    std::sort(items.begin(), items.end());
    for (std::size_t i : items) set.records.push_back({u, i, 1.0, std::nullopt});
  }

  // Features: stored at f32 precision so files and memory agree.
  std::mt19937_64 frng(spec.seed ^ 0x6A09E667F3BCC908ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t m = 0; m < spec.modalities; ++m) {
    Matrix centroids(static_cast<Eigen::Index>(spec.blocks), static_cast<Eigen::Index>(spec.feature_dim));
    for (Eigen::Index k = 0; k < centroids.size(); ++k) centroids.data()[k] = gauss(frng);
    ModalityFeatures f;
    f.modality_id = "m" + std::to_string(m);
    f.values.resize(static_cast<Eigen::Index>(spec.n_items), static_cast<Eigen::Index>(spec.feature_dim));
    for (std::size_t i = 0; i < spec.n_items; ++i)
      for (std::size_t c = 0; c < spec.feature_dim; ++c) {
        const double x = (1.0 - spec.noise) * centroids(static_cast<Eigen::Index>(d.item_block[i]),
                                                        static_cast<Eigen::Index>(c)) +
                         spec.noise * gauss(frng);
        f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = static_cast<float>(x);
      }
    d.features.push_back(std::move(f));
  }
  return d;
}

/// Writes interactions.csv, one `<modality>.mmfv` per modality,
/// item_blocks.csv, user_blocks.csv and a ready-to-run config.ini.
inline void write_synthetic(const SyntheticData& d, const std::string& out_dir, std::size_t cold_threshold = 6) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) input_error(kCli, "cannot create '" + out_dir + "': " + ec.message());
  const fs::path dir(out_dir);
  write_interactions(d.interactions, (dir / "interactions.csv").string());
  for (const auto& f : d.features) write_modality_features(f, (dir / (f.modality_id + ".mmfv")).string());

  std::string items = "item,block\n";
  for (std::size_t i = 0; i < d.item_block.size(); ++i)
    items += d.interactions.items.id(i) + "," + std::to_string(d.item_block[i]) + "\n";
  io::write_file((dir / "item_blocks.csv").string(), items, kCli);
  std::string users = "user,block,sparse\n";
  for (std::size_t u = 0; u < d.user_block.size(); ++u)
    users += d.interactions.users.id(u) + "," + std::to_string(d.user_block[u]) + "," +
             (d.sparse_user[u] ? "1" : "0") + "\n";
  io::write_file((dir / "user_blocks.csv").string(), users, kCli);

  std::string ini = "[data]\ninteractions = interactions.csv\n\n[features]\n";
  for (const auto& f : d.features) ini += f.modality_id + " = " + f.modality_id + ".mmfv\n";
  ini += "\n[ingest]\ncold_threshold = " + std::to_string(cold_threshold) + "\n";
  io::write_file((dir / "config.ini").string(), ini, kCli);
}

}  // namespace mmrs
