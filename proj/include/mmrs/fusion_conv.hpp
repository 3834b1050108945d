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

// Softmax-weighted fusion of modality graphs and parameter-free graph
// convolution (L = A * L_prev, no transforms, no activations).

#pragma once

#include "mmrs/core.hpp"
#include "mmrs/modality_graph.hpp"

#include <span>
#include <vector>

namespace mmrs {

inline constexpr std::string_view kFusionConv = "fusion_conv";

/// Trainable per-modality logits; the importance weights are their softmax.
struct ModalityWeights {
  Vector logits;

  static ModalityWeights uniform(std::size_t n_modalities) {
    return {Vector::Zero(static_cast<Eigen::Index>(n_modalities))};
  }

  Vector weights() const { return softmax(logits); }

  static Vector softmax(const Vector& x) {
    if (x.size() == 0) return x;
    const double m = x.maxCoeff();
    Vector e = (x.array() - m).exp();
    return e / e.sum();
  }
};

struct ConvConfig {
  std::size_t n_layers = 2;
  bool enhance = true;  // add the normalized graph output onto the item embeddings

  void validate() const {
    if (n_layers > 4) config_error(kFusionConv, "n_layers must lie in [0, 4]");
  }
};

/// Layer outputs L^(0..n_layers); layers[0] is the input embedding matrix.
struct ConvStack {
  std::vector<Matrix> layers;

  std::size_t n_layers() const { return layers.empty() ? 0 : layers.size() - 1; }
  const Matrix& final_layer() const { return layers.back(); }
};

/// A = sum_m softmax(logits)_m * graphs[m] over the union of edge sets.
inline SparseItemGraph fuse_modalities(std::span<const SparseItemGraph> graphs, const ModalityWeights& weights) {
  if (graphs.empty()) config_error(kFusionConv, "no modality graphs to fuse");
  if (static_cast<std::size_t>(weights.logits.size()) != graphs.size())
    config_error(kFusionConv, "modality count mismatch: " + std::to_string(graphs.size()) + " graphs, " +
                                  std::to_string(weights.logits.size()) + " logits");
  const std::size_t n = graphs.front().n_items();
  std::vector<const SparseItemGraph*> ptrs;
  for (const auto& g : graphs) {
    if (g.n_items() != n) config_error(kFusionConv, "graph size mismatch");
    ptrs.push_back(&g);
  }
  const Vector w = weights.weights();
  const std::vector<double> coeffs(w.data(), w.data() + w.size());
  return weighted_sum(ptrs, coeffs);
}

/// out = A * in (sparse-dense product).
inline Matrix propagate(const SparseItemGraph& graph, const Matrix& in) {
  Matrix out = Matrix::Zero(in.rows(), in.cols());
  for (std::size_t i = 0; i < graph.n_items(); ++i) {
    auto dst = out.row(static_cast<Eigen::Index>(i));
    for (const auto& e : graph.row(i)) dst.noalias() += e.weight * in.row(static_cast<Eigen::Index>(e.dst));
  }
  return out;
}

/// out = A^T * in.
inline Matrix propagate_transposed(const SparseItemGraph& graph, const Matrix& in) {
  Matrix out = Matrix::Zero(in.rows(), in.cols());
  for (std::size_t i = 0; i < graph.n_items(); ++i) {
    const auto src = in.row(static_cast<Eigen::Index>(i));
    for (const auto& e : graph.row(i)) out.row(static_cast<Eigen::Index>(e.dst)).noalias() += e.weight * src;
  }
  return out;
}

inline ConvStack graph_convolve(const SparseItemGraph& graph, const Matrix& item_emb, std::size_t n_layers) {
  if (static_cast<std::size_t>(item_emb.rows()) != graph.n_items())
    config_error(kFusionConv, "shape mismatch: " + std::to_string(item_emb.rows()) + " embedding rows for " +
                                  std::to_string(graph.n_items()) + " graph items");
  ConvStack stack;
  stack.layers.reserve(n_layers + 1);
  stack.layers.push_back(item_emb);
  for (std::size_t l = 1; l <= n_layers; ++l) {
    stack.layers.push_back(propagate(graph, stack.layers.back()));
    if (!stack.layers.back().allFinite())
      runtime_error(kFusionConv, "non-finite output at layer " + std::to_string(l) + " (unnormalized or corrupt graph?)");
  }
  return stack;
}

}  // namespace mmrs
