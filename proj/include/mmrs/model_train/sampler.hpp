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

#pragma once

#include "mmrs/ingest.hpp"
#include "mmrs/model_train/params.hpp"

#include <random>
#include <vector>

namespace mmrs {

/// (user, observed item, unobserved item).
struct BprTriple {
  std::size_t u = 0;
  std::size_t i = 0;
  std::size_t j = 0;

  friend bool operator==(const BprTriple&, const BprTriple&) = default;
};

/// `count` items drawn uniformly, with replacement, from the items the user
/// has not interacted with. Sparse users use rejection sampling; users that
/// cover more than half the catalog draw from the explicit complement.
inline std::vector<std::size_t> sample_negatives(const UserItemIndex& positives, std::size_t n_items,
                                                 std::size_t user, std::size_t count, std::mt19937_64& rng) {
  const std::size_t n_pos = positives.count(user);
  if (n_pos >= n_items) runtime_error(kModelTrain, "user " + std::to_string(user) + " has interacted with every item");
  std::vector<std::size_t> out;
  out.reserve(count);
  if (2 * n_pos <= n_items) {
    std::uniform_int_distribution<std::size_t> dist(0, n_items - 1);
    while (out.size() < count) {
      const std::size_t j = dist(rng);
      if (!positives.contains(user, j)) out.push_back(j);
    }
    return out;
  }
  std::vector<std::size_t> complement;
  complement.reserve(n_items - n_pos);
  const auto pos = positives.items(user);
  std::size_t p = 0;
  for (std::size_t j = 0; j < n_items; ++j) {
    while (p < pos.size() && pos[p] < j) ++p;
    if (p < pos.size() && pos[p] == j) continue;
    complement.push_back(j);
  }
  std::uniform_int_distribution<std::size_t> dist(0, complement.size() - 1);
  while (out.size() < count) out.push_back(complement[dist(rng)]);
  return out;
}

inline std::vector<std::size_t> sample_negatives(const InteractionSet& train, std::size_t user, std::size_t count,
                                                 std::mt19937_64& rng) {
  return sample_negatives(UserItemIndex(train), train.n_items, user, count, rng);
}

/// One triple per (training positive, negative draw), in shuffled order.
inline std::vector<BprTriple> sample_triples(const InteractionSet& train, const UserItemIndex& positives,
                                             std::size_t negatives_per_positive, std::mt19937_64& rng) {
  std::vector<BprTriple> triples;
  triples.reserve(train.records.size() * negatives_per_positive);
  for (const auto& r : train.records)
    for (std::size_t j : sample_negatives(positives, train.n_items, r.user, negatives_per_positive, rng))
      triples.push_back({r.user, r.item, j});
  std::shuffle(triples.begin(), triples.end(), rng);
  return triples;
}

}  // namespace mmrs
