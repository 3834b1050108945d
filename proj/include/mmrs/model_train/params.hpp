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

#include "mmrs/core.hpp"
#include "mmrs/modality_graph.hpp"

#include <random>
#include <span>
#include <string>
#include <vector>

namespace mmrs {

inline constexpr std::string_view kModelTrain = "model_train";

/// Every trainable quantity. Gradients and optimizer moments reuse the type.
struct ModelParams {
  Matrix user_emb;                            // n_users x d
  Matrix item_emb;                            // n_items x d
  std::vector<ModalityTransform> transforms;  // one per modality when the learned graph is on
  Vector modality_logits;                     // pre-softmax modality importance

  std::size_t dim() const { return static_cast<std::size_t>(user_emb.cols()); }
  std::size_t n_users() const { return static_cast<std::size_t>(user_emb.rows()); }
  std::size_t n_items() const { return static_cast<std::size_t>(item_emb.rows()); }

  ModelParams zeros_like() const {
    ModelParams z;
    z.user_emb = Matrix::Zero(user_emb.rows(), user_emb.cols());
    z.item_emb = Matrix::Zero(item_emb.rows(), item_emb.cols());
    for (const auto& t : transforms)
      z.transforms.push_back({Matrix::Zero(t.weight.rows(), t.weight.cols()), Vector::Zero(t.bias.size())});
    z.modality_logits = Vector::Zero(modality_logits.size());
    return z;
  }

  bool all_finite() const {
    if (!user_emb.allFinite() || !item_emb.allFinite() || !modality_logits.allFinite()) return false;
    for (const auto& t : transforms)
      if (!t.weight.allFinite() || !t.bias.allFinite()) return false;
    return true;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    const auto same = [](const auto& x, const auto& y) {
      return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
    };
    return same(a.user_emb, b.user_emb) && same(a.item_emb, b.item_emb) && a.transforms == b.transforms &&
           same(a.modality_logits, b.modality_logits);
  }
};

/// Flat views of each tensor, always in the order: users, items,
/// (transform weight, transform bias) per modality, logits.
inline std::vector<std::span<double>> tensors(ModelParams& p) {
  std::vector<std::span<double>> out;
  out.emplace_back(p.user_emb.data(), static_cast<std::size_t>(p.user_emb.size()));
  out.emplace_back(p.item_emb.data(), static_cast<std::size_t>(p.item_emb.size()));
  for (auto& t : p.transforms) {
    out.emplace_back(t.weight.data(), static_cast<std::size_t>(t.weight.size()));
    out.emplace_back(t.bias.data(), static_cast<std::size_t>(t.bias.size()));
  }
  out.emplace_back(p.modality_logits.data(), static_cast<std::size_t>(p.modality_logits.size()));
  return out;
}

inline std::vector<std::string> tensor_names(const ModelParams& p) {
  std::vector<std::string> out{"user_emb", "item_emb"};
  for (std::size_t f = 0; f < p.transforms.size(); ++f) {
    out.push_back("transform[" + std::to_string(f) + "].weight");
    out.push_back("transform[" + std::to_string(f) + "].bias");
  }
  out.emplace_back("modality_logits");
  return out;
}

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  std::size_t dim = 64;
  double learning_rate = 1e-3;
  std::size_t batch_size = 512;
  std::size_t epochs = 100;
  double l2_reg = 1e-4;
  std::uint64_t seed = 42;
  std::size_t negatives_per_positive = 1;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::size_t patience = 10;  // epochs without validation improvement; 0 disables early stopping
  double init_scale = 0.1;    // half-width of the uniform embedding init
  std::size_t eval_k = 20;    // cutoff of the per-epoch validation recall

  void validate() const {
    if (!(learning_rate > 0.0)) config_error(kModelTrain, "learning_rate must be > 0");
    if (batch_size < 1) config_error(kModelTrain, "batch_size must be >= 1");
    if (dim < 1) config_error(kModelTrain, "dim must be >= 1");
    if (!(l2_reg >= 0.0)) config_error(kModelTrain, "l2_reg must be >= 0");
    if (negatives_per_positive < 1) config_error(kModelTrain, "negatives_per_positive must be >= 1");
    if (!(init_scale > 0.0)) config_error(kModelTrain, "init_scale must be > 0");
    if (eval_k < 1) config_error(kModelTrain, "eval_k must be >= 1");
  }
};

inline Matrix uniform_matrix(std::size_t rows, std::size_t cols, double half_width, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-half_width, half_width);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = dist(rng);
  return m;
}

/// User then item embeddings, drawn in that order from `rng`.
inline ModelParams init_embeddings(std::size_t n_users, std::size_t n_items, const TrainConfig& cfg,
                                   std::mt19937_64& rng) {
  ModelParams p;
  p.user_emb = uniform_matrix(n_users, cfg.dim, cfg.init_scale, rng);
  p.item_emb = uniform_matrix(n_items, cfg.dim, cfg.init_scale, rng);
  return p;
}

}  // namespace mmrs
