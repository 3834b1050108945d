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

// Scoring models and the BPR objective.
//
// Both models expose the same surface to the trainer:
//   init_params, begin_epoch, forward, backward, item_representations.
// `forward` produces the item matrix that user embeddings are scored against;
// `backward` turns the gradient w.r.t. that matrix into parameter gradients.

#pragma once

#include "mmrs/fusion_conv.hpp"
#include "mmrs/ingest.hpp"
#include "mmrs/model_train/params.hpp"
#include "mmrs/model_train/sampler.hpp"
#include "mmrs/modality_graph.hpp"

#include <cmath>
#include <concepts>
#include <random>
#include <span>
#include <vector>

namespace mmrs {

inline double score(std::span<const double> user_row, std::span<const double> item_row) {
  if (user_row.size() != item_row.size())
    config_error(kModelTrain, "score: dimension mismatch (" + std::to_string(user_row.size()) + " vs " +
                                  std::to_string(item_row.size()) + ")");
  double s = 0.0;
  for (std::size_t k = 0; k < user_row.size(); ++k) s += user_row[k] * item_row[k];
  return s;
}

/// item_emb + row-normalized conv output; zero conv rows pass through.
inline Matrix enhance_item_embeddings(const Matrix& item_emb, const Matrix& conv_final, Vector* conv_norms = nullptr) {
  if (item_emb.rows() != conv_final.rows() || item_emb.cols() != conv_final.cols())
    config_error(kModelTrain, "enhance_item_embeddings: shape mismatch");
  Matrix out = item_emb;
  Vector norms(conv_final.rows());
  for (Eigen::Index i = 0; i < conv_final.rows(); ++i) {
    norms(i) = conv_final.row(i).norm();
    if (norms(i) > 0.0) out.row(i) += conv_final.row(i) / norms(i);
  }
  if (conv_norms) *conv_norms = std::move(norms);
  return out;
}

/// -ln(sigmoid(m)), computed without overflow.
inline double neg_log_sigmoid(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Mean BPR ranking loss over a batch and, separately, the L2 penalty on the
/// embeddings the batch touches: l2_reg * mean(|u|^2 + |e_i|^2 + |e_j|^2).
struct BprLoss {
  double ranking = 0.0;
  double regularization = 0.0;
  double total() const { return ranking + regularization; }
};

/// Loss of a batch scored against `item_repr`. When `grads` is non-null the
/// user-embedding gradient and the penalty's item gradient (w.r.t. `item_base`)
/// are accumulated into it, and the ranking gradient w.r.t. `item_repr` into
/// `grad_item_repr`.
inline BprLoss bpr_batch(const Matrix& user_emb, const Matrix& item_repr, const Matrix& item_base,
                         std::span<const BprTriple> triples, double l2_reg, ModelParams* grads = nullptr,
                         Matrix* grad_item_repr = nullptr) {
  if (triples.empty()) config_error(kModelTrain, "bpr loss of an empty triple list");
  const double inv_b = 1.0 / static_cast<double>(triples.size());
  BprLoss loss;
  for (const auto& t : triples) {
    const auto u = user_emb.row(static_cast<Eigen::Index>(t.u));
    const auto ei = item_repr.row(static_cast<Eigen::Index>(t.i));
    const auto ej = item_repr.row(static_cast<Eigen::Index>(t.j));
    const double margin = u.dot(ei) - u.dot(ej);
    loss.ranking += neg_log_sigmoid(margin);
    const auto bi = item_base.row(static_cast<Eigen::Index>(t.i));
    const auto bj = item_base.row(static_cast<Eigen::Index>(t.j));
    loss.regularization += u.squaredNorm() + bi.squaredNorm() + bj.squaredNorm();
    if (grads) {
      const double g = -sigmoid(-margin) * inv_b;  // d loss / d margin
      grads->user_emb.row(static_cast<Eigen::Index>(t.u)) += g * (ei - ej) + (2.0 * l2_reg * inv_b) * u;
      grads->item_emb.row(static_cast<Eigen::Index>(t.i)) += (2.0 * l2_reg * inv_b) * bi;
      grads->item_emb.row(static_cast<Eigen::Index>(t.j)) += (2.0 * l2_reg * inv_b) * bj;
      grad_item_repr->row(static_cast<Eigen::Index>(t.i)) += g * u;
      grad_item_repr->row(static_cast<Eigen::Index>(t.j)) -= g * u;
    }
  }
  loss.ranking *= inv_b;
  loss.regularization *= l2_reg * inv_b;
  return loss;
}

// ---------------------------------------------------------------------------

/// Plain dot-product factorization: the item representation is the item
/// embedding itself.
class MatrixFactorization {
 public:
  struct State {
    const Matrix* items = nullptr;
    const Matrix& item_repr() const { return *items; }
  };

  ModelParams init_params(std::size_t n_users, std::size_t n_items, const TrainConfig& cfg,
                          std::mt19937_64& rng) const {
    return init_embeddings(n_users, n_items, cfg, rng);
  }

  void begin_epoch(const ModelParams&, std::size_t) {}

  State forward(const ModelParams& p) const { return {&p.item_emb}; }

  void backward(const ModelParams&, const State&, const Matrix& grad_item_repr, ModelParams& grads) const {
    grads.item_emb += grad_item_repr;
  }

  Matrix item_representations(const ModelParams& p) const { return p.item_emb; }
};

// ---------------------------------------------------------------------------

/// Multi-modal latent item graph on top of ID embeddings.
///
/// Per modality a fixed graph is built once from raw features (normalized
/// cosine kNN). If the learned graph is on, features are also passed through a
/// trainable transform and a second kNN graph is built over the result; its
/// neighbor selection is redone at `begin_epoch` every `relearn_every` epochs
/// and held fixed in between, while its edge weights are recomputed (and
/// differentiated) every step. The two graphs are blended with sigma, fused
/// across modalities with softmax weights, and used to convolve the item
/// embeddings; the normalized final layer is added to each item embedding.
class GraphRecommender {
 public:
  struct ModalityState {
    Matrix transformed;            // H T^T + b
    Vector norms;                  // row norms of `transformed`
    Matrix unit;                   // rows of `transformed` at unit norm
    std::vector<double> raw_cos;   // per learned edge, before clamping
    SparseItemGraph cosine;        // clamped cosine on the learned topology
    Vector degree;                 // row sums of `cosine`
    SparseItemGraph learned;       // normalized `cosine`
    SparseItemGraph blended;       // sigma * initial + (1 - sigma) * learned
  };

  struct State {
    std::vector<ModalityState> modalities;
    Vector weights;  // softmax of the logits
    SparseItemGraph fused;
    ConvStack conv;
    Vector conv_norms;
    Matrix items;  // enhanced item embeddings
    const Matrix& item_repr() const { return items; }
  };

  GraphRecommender(std::vector<ModalityFeatures> modalities, GraphConfig graph, ConvConfig conv)
      : modalities_(std::move(modalities)), graph_(graph), conv_(conv) {
    conv_.validate();
    if (!conv_.enhance) return;
    if (modalities_.empty()) config_error(kModelTrain, "the graph model needs at least one modality");
    const std::size_t n = modalities_.front().n_items();
    for (const auto& m : modalities_) {
      if (m.n_items() != n)
        config_error(kModelTrain, "modality '" + m.modality_id + "' has " + std::to_string(m.n_items()) +
                                      " items, expected " + std::to_string(n));
      if (!m.values.allFinite()) config_error(kModelTrain, "modality '" + m.modality_id + "' has non-finite values");
    }
    graph_.validate(n);
    for (const auto& m : modalities_)
      initial_.push_back(normalize_adjacency(build_knn_graph(m.values, graph_.k, graph_.chunk_rows)));
  }

  const GraphConfig& graph_config() const { return graph_; }
  const ConvConfig& conv_config() const { return conv_; }
  const std::vector<ModalityFeatures>& modalities() const { return modalities_; }
  const std::vector<SparseItemGraph>& initial_graphs() const { return initial_; }
  const std::vector<SparseItemGraph>& learned_topology() const { return topology_; }
  bool uses_learned_graph() const { return conv_.enhance && graph_.learned_graph; }

  std::size_t transform_dim(std::size_t in_dim) const {
    return graph_.transform_dim ? graph_.transform_dim : std::min<std::size_t>(in_dim, 128);
  }

  /// Embeddings first (same draws as MatrixFactorization), then transforms:
  /// identity when square, otherwise uniform with half-width sqrt(3 / in_dim).
  ModelParams init_params(std::size_t n_users, std::size_t n_items, const TrainConfig& cfg,
                          std::mt19937_64& rng) const {
    if (conv_.enhance && n_items != modalities_.front().n_items())
      config_error(kModelTrain, "interaction data has " + std::to_string(n_items) + " items, features have " +
                                    std::to_string(modalities_.front().n_items()));
    ModelParams p = init_embeddings(n_users, n_items, cfg, rng);
    if (uses_learned_graph()) {
      for (const auto& m : modalities_) {
        const std::size_t in = m.dim(), out = transform_dim(in);
        if (out == in)
          p.transforms.push_back(ModalityTransform::identity(in));
        else
          p.transforms.push_back({uniform_matrix(out, in, std::sqrt(3.0 / static_cast<double>(in)), rng),
                                  Vector::Zero(static_cast<Eigen::Index>(out))});
      }
    }
    if (conv_.enhance) p.modality_logits = Vector::Zero(static_cast<Eigen::Index>(modalities_.size()));
    return p;
  }

  void begin_epoch(const ModelParams& p, std::size_t epoch) {
    if (uses_learned_graph() && (topology_.empty() || epoch % graph_.relearn_every == 0)) rebuild_topology(p);
  }

  /// Reselects learned-graph neighbors from the current transforms.
  void rebuild_topology(const ModelParams& p) { topology_ = select_topology(p); }

  State forward(const ModelParams& p) const {
    if (uses_learned_graph() && topology_.empty())
      runtime_error(kModelTrain, "learned graph topology not built; call begin_epoch or rebuild_topology first");
    return forward_with(p, topology_);
  }

  /// Inference path: neighbor selection redone from the given parameters.
  Matrix item_representations(const ModelParams& p) const {
    if (!conv_.enhance) return p.item_emb;
    return forward_with(p, select_topology(p)).items;
  }

  State forward_fresh(const ModelParams& p) const { return forward_with(p, select_topology(p)); }

  void backward(const ModelParams&, const State& s, const Matrix& grad_items, ModelParams& grads) const {
    grads.item_emb += grad_items;
    if (!conv_.enhance) return;
    const std::size_t n_layers = conv_.n_layers;

    // Through the row normalization of the final layer.
    const Matrix& last = s.conv.final_layer();
    Matrix g_layer = Matrix::Zero(last.rows(), last.cols());
    for (Eigen::Index r = 0; r < last.rows(); ++r) {
      const double norm = s.conv_norms(r);
      if (norm <= 0.0) continue;
      const auto unit = last.row(r) / norm;
      const auto g = grad_items.row(r);
      g_layer.row(r) = (g - unit * unit.dot(g)) / norm;
    }

    // Through L^(l) = A L^(l-1).
    std::vector<double> g_fused(s.fused.n_edges(), 0.0);
    for (std::size_t l = n_layers; l >= 1; --l) {
      const Matrix& prev = s.conv.layers[l - 1];
      for (std::size_t i = 0; i < s.fused.n_items(); ++i) {
        const auto gi = g_layer.row(static_cast<Eigen::Index>(i));
        std::size_t pos = s.fused.row_begin(i);
        for (const auto& e : s.fused.row(i)) g_fused[pos++] += gi.dot(prev.row(static_cast<Eigen::Index>(e.dst)));
      }
      g_layer = propagate_transposed(s.fused, g_layer);
    }
    grads.item_emb += g_layer;
    if (n_layers == 0) return;

    // Through A = sum_f w_f A_f and the softmax.
    const std::size_t n_mod = modalities_.size();
    Vector g_w = Vector::Zero(static_cast<Eigen::Index>(n_mod));
    for (std::size_t f = 0; f < n_mod; ++f) {
      const auto& blended = s.modalities[f].blended;
      for (std::size_t i = 0; i < blended.n_items(); ++i)
        for (const auto& e : blended.row(i)) g_w(static_cast<Eigen::Index>(f)) += fused_grad(s, g_fused, i, e.dst) * e.weight;
    }
    const double mean = s.weights.dot(g_w);
    grads.modality_logits.array() += s.weights.array() * (g_w.array() - mean);

    if (!uses_learned_graph() || graph_.sigma >= 1.0) return;

    for (std::size_t f = 0; f < n_mod; ++f) {
      const auto& ms = s.modalities[f];
      const double coeff = s.weights(static_cast<Eigen::Index>(f)) * (1.0 - graph_.sigma);
      const std::size_t n = ms.learned.n_items();

      // Through the degree normalization: learned_ij = c_ij / sqrt(d_i d_j).
      std::vector<double> g_learned(ms.learned.n_edges());
      Vector g_deg = Vector::Zero(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t pos = ms.learned.row_begin(i);
        for (const auto& e : ms.learned.row(i)) {
          const double g = coeff * fused_grad(s, g_fused, i, e.dst);
          g_learned[pos++] = g;
          const double di = ms.degree(static_cast<Eigen::Index>(i)), dj = ms.degree(static_cast<Eigen::Index>(e.dst));
          if (di > 0.0 && dj > 0.0) {
            g_deg(static_cast<Eigen::Index>(i)) -= 0.5 * g * e.weight / di;
            g_deg(static_cast<Eigen::Index>(e.dst)) -= 0.5 * g * e.weight / dj;
          }
        }
      }

      // Through the clamped cosine onto unit rows.
      Matrix g_unit = Matrix::Zero(ms.unit.rows(), ms.unit.cols());
      for (std::size_t i = 0; i < n; ++i) {
        const double di = ms.degree(static_cast<Eigen::Index>(i));
        std::size_t pos = ms.cosine.row_begin(i);
        for (const auto& e : ms.cosine.row(i)) {
          const std::size_t k = pos++;
          if (ms.raw_cos[k] <= 0.0) continue;
          const double dj = ms.degree(static_cast<Eigen::Index>(e.dst));
          double g_c = 0.0;
          if (di > 0.0 && dj > 0.0) g_c += g_learned[k] / std::sqrt(di * dj);
          if (di > 0.0) g_c += g_deg(static_cast<Eigen::Index>(i));
          if (g_c == 0.0) continue;
          g_unit.row(static_cast<Eigen::Index>(i)) += g_c * ms.unit.row(static_cast<Eigen::Index>(e.dst));
          g_unit.row(static_cast<Eigen::Index>(e.dst)) += g_c * ms.unit.row(static_cast<Eigen::Index>(i));
        }
      }

      // Through the row normalization onto the transformed features.
      Matrix g_trans = Matrix::Zero(ms.transformed.rows(), ms.transformed.cols());
      for (Eigen::Index i = 0; i < g_unit.rows(); ++i) {
        const double norm = ms.norms(i);
        if (norm <= 0.0) continue;
        const auto z = ms.unit.row(i);
        const auto g = g_unit.row(i);
        g_trans.row(i) = (g - z * z.dot(g)) / norm;
      }
      grads.transforms[f].weight.noalias() += g_trans.transpose() * modalities_[f].values;
      grads.transforms[f].bias += g_trans.colwise().sum().transpose();
    }
  }

  /// Fused graph at the given parameters with fresh neighbor selection.
  SparseItemGraph fused_graph(const ModelParams& p) const { return forward_fresh(p).fused; }

 private:
  static double fused_grad(const State& s, const std::vector<double>& g_fused, std::size_t i, std::size_t j) {
    const auto pos = s.fused.find(i, j);
    return pos ? g_fused[*pos] : 0.0;
  }

  std::vector<SparseItemGraph> select_topology(const ModelParams& p) const {
    std::vector<SparseItemGraph> topo;
    if (!uses_learned_graph()) return topo;
    if (p.transforms.size() != modalities_.size())
      config_error(kModelTrain, "expected " + std::to_string(modalities_.size()) + " modality transforms, got " +
                                    std::to_string(p.transforms.size()));
    for (std::size_t f = 0; f < modalities_.size(); ++f)
      topo.push_back(build_knn_graph(transform_features(modalities_[f].values, p.transforms[f]), graph_.k,
                                     graph_.chunk_rows));
    return topo;
  }

  State forward_with(const ModelParams& p, const std::vector<SparseItemGraph>& topology) const {
    State s;
    if (!conv_.enhance) {
      s.items = p.item_emb;
      return s;
    }
    if (static_cast<std::size_t>(p.item_emb.rows()) != modalities_.front().n_items())
      config_error(kModelTrain, "item embedding rows do not match the feature item count");
    if (static_cast<std::size_t>(p.modality_logits.size()) != modalities_.size())
      config_error(kModelTrain, "expected one modality logit per modality");

    const std::size_t n_mod = modalities_.size();
    s.modalities.resize(n_mod);
    for (std::size_t f = 0; f < n_mod; ++f) {
      auto& ms = s.modalities[f];
      if (!uses_learned_graph()) {
        ms.blended = initial_[f];
        continue;
      }
      ms.transformed = transform_features(modalities_[f].values, p.transforms[f]);
      ms.unit = detail::unit_rows(ms.transformed, &ms.norms);
      ms.cosine = topology[f];
      ms.raw_cos.resize(ms.cosine.n_edges());
      for (std::size_t i = 0; i < ms.cosine.n_items(); ++i) {
        std::size_t pos = ms.cosine.row_begin(i);
        for (auto& e : ms.cosine.row(i)) {
          const double c = ms.unit.row(static_cast<Eigen::Index>(i)).dot(ms.unit.row(static_cast<Eigen::Index>(e.dst)));
          ms.raw_cos[pos++] = c;
          e.weight = std::max(c, 0.0);
        }
      }
      ms.degree = row_degrees(ms.cosine);
      ms.learned = normalize_adjacency(ms.cosine);
      ms.blended = blend_graphs(initial_[f], ms.learned, graph_.sigma);
    }
    s.weights = ModalityWeights::softmax(p.modality_logits);
    std::vector<const SparseItemGraph*> ptrs;
    for (const auto& ms : s.modalities) ptrs.push_back(&ms.blended);
    const std::vector<double> coeffs(s.weights.data(), s.weights.data() + s.weights.size());
    s.fused = weighted_sum(ptrs, coeffs);
    s.conv = graph_convolve(s.fused, p.item_emb, conv_.n_layers);
    s.items = enhance_item_embeddings(p.item_emb, s.conv.final_layer(), &s.conv_norms);
    return s;
  }

  std::vector<ModalityFeatures> modalities_;
  GraphConfig graph_;
  ConvConfig conv_;
  std::vector<SparseItemGraph> initial_;
  std::vector<SparseItemGraph> topology_;
};

/// What the trainer needs from a model.
template <class M>
concept RankingModel = requires(M& m, const M& cm, const ModelParams& p, ModelParams& g, const Matrix& gm,
                                std::mt19937_64& rng, const TrainConfig& cfg) {
  { cm.init_params(std::size_t{}, std::size_t{}, cfg, rng) } -> std::same_as<ModelParams>;
  m.begin_epoch(p, std::size_t{});
  { cm.forward(p).item_repr() } -> std::convertible_to<const Matrix&>;
  cm.backward(p, cm.forward(p), gm, g);
  { cm.item_representations(p) } -> std::convertible_to<Matrix>;
};

/// Loss of `triples` under the model's current forward pass.
template <RankingModel M>
BprLoss bpr_loss(std::span<const BprTriple> triples, const ModelParams& params, const M& model, double l2_reg) {
  const auto state = model.forward(params);
  return bpr_batch(params.user_emb, state.item_repr(), params.item_emb, triples, l2_reg);
}

/// Loss and full parameter gradient of one batch.
template <RankingModel M>
BprLoss loss_and_gradient(std::span<const BprTriple> triples, const ModelParams& params, const M& model,
                          double l2_reg, ModelParams& grads) {
  const auto state = model.forward(params);
  const Matrix& items = state.item_repr();
  Matrix grad_items = Matrix::Zero(items.rows(), items.cols());
  const BprLoss loss = bpr_batch(params.user_emb, items, params.item_emb, triples, l2_reg, &grads, &grad_items);
  model.backward(params, state, grad_items, grads);
  return loss;
}

}  // namespace mmrs
