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

// Per-modality item graphs: cosine kNN sparsification, symmetric degree
// normalization, trainable feature transforms and the skip-connection blend.

#pragma once

#include "mmrs/core.hpp"
#include "mmrs/ingest.hpp"
#include "mmrs/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmrs {

inline constexpr std::string_view kModalityGraph = "modality_graph";

struct Edge {
  std::size_t dst = 0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Row-indexed sparse item x item adjacency (CSR). Each row is sorted by
/// neighbor index, has no self-loop, and carries finite non-negative weights.
class SparseItemGraph {
 public:
  SparseItemGraph() = default;
  explicit SparseItemGraph(std::size_t n_items) : offsets_(n_items + 1, 0) {}

  /// Validates and sorts each row.
  static SparseItemGraph from_rows(std::vector<std::vector<Edge>> rows) {
    SparseItemGraph g(rows.size());
    const std::size_t n = rows.size();
    std::size_t total = 0;
    for (const auto& r : rows) total += r.size();
    g.edges_.reserve(total);
    for (std::size_t i = 0; i < n; ++i) {
      auto& r = rows[i];
      std::sort(r.begin(), r.end(), [](const Edge& a, const Edge& b) { return a.dst < b.dst; });
      for (std::size_t e = 0; e < r.size(); ++e) {
        const auto& edge = r[e];
        if (edge.dst >= n)
          config_error(kModalityGraph, "edge " + std::to_string(i) + "->" + std::to_string(edge.dst) + " out of range");
        if (edge.dst == i) config_error(kModalityGraph, "self-loop on item " + std::to_string(i));
        if (e > 0 && r[e - 1].dst == edge.dst)
          config_error(kModalityGraph, "duplicate edge " + std::to_string(i) + "->" + std::to_string(edge.dst));
        if (!std::isfinite(edge.weight) || edge.weight < 0.0)
          config_error(kModalityGraph, "edge " + std::to_string(i) + "->" + std::to_string(edge.dst) +
                                           " has a negative or non-finite weight");
      }
      g.edges_.insert(g.edges_.end(), r.begin(), r.end());
      g.offsets_[i + 1] = g.edges_.size();
    }
    return g;
  }

  std::size_t n_items() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t n_edges() const { return edges_.size(); }

  std::span<const Edge> row(std::size_t i) const {
    return std::span(edges_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
  }
  std::span<Edge> row(std::size_t i) { return std::span(edges_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]); }

  /// Position of edge i->j in the flat edge array.
  std::optional<std::size_t> find(std::size_t i, std::size_t j) const {
    const auto r = row(i);
    auto it = std::lower_bound(r.begin(), r.end(), j, [](const Edge& e, std::size_t v) { return e.dst < v; });
    if (it == r.end() || it->dst != j) return std::nullopt;
    return offsets_[i] + static_cast<std::size_t>(it - r.begin());
  }

  double weight(std::size_t i, std::size_t j) const {
    const auto pos = find(i, j);
    return pos ? edges_[*pos].weight : 0.0;
  }

  std::span<const Edge> edges() const { return edges_; }
  std::span<Edge> edges() { return edges_; }
  std::size_t row_begin(std::size_t i) const { return offsets_[i]; }

  Matrix to_dense() const {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n_items()), static_cast<Eigen::Index>(n_items()));
    for (std::size_t i = 0; i < n_items(); ++i)
      for (const auto& e : row(i)) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e.dst)) = e.weight;
    return m;
  }

  bool same_pattern(const SparseItemGraph& other) const {
    if (offsets_ != other.offsets_) return false;
    for (std::size_t k = 0; k < edges_.size(); ++k)
      if (edges_[k].dst != other.edges_[k].dst) return false;
    return true;
  }

  friend bool operator==(const SparseItemGraph&, const SparseItemGraph&) = default;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Edge> edges_;
};

struct GraphConfig {
  std::size_t k = 10;              // neighbors kept per row
  double sigma = 0.7;              // weight of the raw-feature graph in the blend
  std::size_t chunk_rows = 1024;   // similarity block height
  bool learned_graph = true;       // build the graph over transformed features too
  std::size_t relearn_every = 1;   // epochs between learned-graph neighbor reselection
  std::size_t transform_dim = 0;   // 0: min(feature dim, 128)
  std::size_t rounds = 1;          // reserved; only single-round refinement is implemented

  void validate(std::size_t n_items) const {
    if (k < 1 || k >= n_items)
      config_error(kModalityGraph, "k must satisfy 1 <= k < n_items (k=" + std::to_string(k) +
                                       ", n_items=" + std::to_string(n_items) + ")");
    if (!(sigma > 0.0 && sigma <= 1.0)) config_error(kModalityGraph, "sigma must lie in (0, 1]");
    if (chunk_rows < 1) config_error(kModalityGraph, "chunk_rows must be positive");
    if (relearn_every < 1) config_error(kModalityGraph, "relearn_every must be positive");
    if (rounds != 1) config_error(kModalityGraph, "only graph_rounds = 1 is supported");
  }
};

/// Trainable affine map applied to every feature row: out = weight * h + bias.
struct ModalityTransform {
  Matrix weight;  // out_dim x in_dim
  Vector bias;    // out_dim

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }

  static ModalityTransform identity(std::size_t dim) {
    return {Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)),
            Vector::Zero(static_cast<Eigen::Index>(dim))};
  }

  friend bool operator==(const ModalityTransform& a, const ModalityTransform& b) {
    return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() &&
           a.bias.size() == b.bias.size() && a.weight == b.weight && a.bias == b.bias;
  }
};

namespace detail {

/// Rows scaled to unit L2 norm; zero rows stay zero.
inline Matrix unit_rows(const Matrix& m, Vector* norms = nullptr) {
  Matrix out = m;
  Vector n(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    n(i) = m.row(i).norm();
    if (n(i) > 0.0) out.row(i) /= n(i);
  }
  if (norms) *norms = std::move(n);
  return out;
}

}  // namespace detail

/// Cosine kNN graph over the rows of `features`.
///
/// For each row the k most similar other rows are selected (ties at equal
/// similarity go to the smaller index); similarities <= 0 are dropped, so a
/// zero feature vector gets no edges. Similarities are computed block by block
/// (`chunk_rows` rows at a time) and blocks are distributed over workers.
inline SparseItemGraph build_knn_graph(const Matrix& features, std::size_t k, std::size_t chunk_rows = 1024,
                                       unsigned threads = thread_count()) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (n == 0 || features.cols() == 0) config_error(kModalityGraph, "empty feature matrix");
  if (k < 1 || k >= n)
    config_error(kModalityGraph, "k must satisfy 1 <= k < n_items (k=" + std::to_string(k) + ", n_items=" +
                                     std::to_string(n) + ")");
  if (!features.allFinite()) config_error(kModalityGraph, "features must be finite");
  chunk_rows = std::max<std::size_t>(1, chunk_rows);

  const Matrix unit = detail::unit_rows(features);
  std::vector<std::vector<Edge>> rows(n);
  const std::size_t n_blocks = (n + chunk_rows - 1) / chunk_rows;

  parallel_for(
      n_blocks,
      [&](std::size_t block) {
        const std::size_t r0 = block * chunk_rows;
        const std::size_t len = std::min(chunk_rows, n - r0);
        const Matrix sim = unit.middleRows(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(len)) *
                           unit.transpose();
        std::vector<std::size_t> cand;
        cand.reserve(n);
        for (std::size_t b = 0; b < len; ++b) {
          const std::size_t i = r0 + b;
          const auto srow = sim.row(static_cast<Eigen::Index>(b));
          cand.clear();
          for (std::size_t j = 0; j < n; ++j)
            if (j != i && srow(static_cast<Eigen::Index>(j)) > 0.0) cand.push_back(j);
          const auto better = [&](std::size_t a, std::size_t c) {
            const double sa = srow(static_cast<Eigen::Index>(a)), sc = srow(static_cast<Eigen::Index>(c));
            return sa != sc ? sa > sc : a < c;
          };
          if (cand.size() > k) {
            std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1), cand.end(), better);
            cand.resize(k);
          }
          auto& out = rows[i];
          out.reserve(cand.size());
          for (std::size_t j : cand) out.push_back({j, srow(static_cast<Eigen::Index>(j))});
        }
      },
      threads);
  return SparseItemGraph::from_rows(std::move(rows));
}

inline SparseItemGraph build_knn_graph(const ModalityFeatures& features, std::size_t k, std::size_t chunk_rows = 1024,
                                       unsigned threads = thread_count()) {
  return build_knn_graph(features.values, k, chunk_rows, threads);
}

/// Row-sum degrees of a graph.
inline Vector row_degrees(const SparseItemGraph& graph) {
  Vector deg = Vector::Zero(static_cast<Eigen::Index>(graph.n_items()));
  for (std::size_t i = 0; i < graph.n_items(); ++i)
    for (const auto& e : graph.row(i)) deg(static_cast<Eigen::Index>(i)) += e.weight;
  return deg;
}

/// D^{-1/2} M D^{-1/2} with D the diagonal of row sums. The sparsity pattern is
/// preserved; an edge touching a zero-degree node gets weight 0.
inline SparseItemGraph normalize_adjacency(const SparseItemGraph& graph) {
  for (const auto& e : graph.edges())
    if (e.weight < 0.0) config_error(kModalityGraph, "negative weight encountered during normalization");
  const Vector deg = row_degrees(graph);
  Vector inv_sqrt = Vector::Zero(deg.size());
  for (Eigen::Index i = 0; i < deg.size(); ++i)
    if (deg(i) > 0.0) inv_sqrt(i) = 1.0 / std::sqrt(deg(i));
  SparseItemGraph out = graph;
  for (std::size_t i = 0; i < out.n_items(); ++i)
    for (auto& e : out.row(i))
      e.weight = e.weight * inv_sqrt(static_cast<Eigen::Index>(i)) * inv_sqrt(static_cast<Eigen::Index>(e.dst));
  return out;
}

inline Matrix transform_features(const Matrix& features, const ModalityTransform& transform) {
  if (transform.in_dim() != static_cast<std::size_t>(features.cols()))
    config_error(kModalityGraph, "dimension mismatch: transform expects " + std::to_string(transform.in_dim()) +
                                     " inputs, features have " + std::to_string(features.cols()));
  if (transform.bias.size() != transform.weight.rows())
    config_error(kModalityGraph, "dimension mismatch: bias length differs from transform rows");
  Matrix out = features * transform.weight.transpose();
  out.rowwise() += transform.bias.transpose();
  return out;
}

inline ModalityFeatures transform_features(const ModalityFeatures& features, const ModalityTransform& transform) {
  return {features.modality_id, transform_features(features.values, transform), 0};
}

/// kNN graph over transformed features, normalized.
inline SparseItemGraph build_learned_graph(const Matrix& features, const ModalityTransform& transform, std::size_t k,
                                           std::size_t chunk_rows = 1024, unsigned threads = thread_count()) {
  const Matrix transformed = transform_features(features, transform);
  return normalize_adjacency(build_knn_graph(transformed, k, chunk_rows, threads));
}

inline SparseItemGraph build_learned_graph(const ModalityFeatures& features, const ModalityTransform& transform,
                                           std::size_t k, std::size_t chunk_rows = 1024,
                                           unsigned threads = thread_count()) {
  return build_learned_graph(features.values, transform, k, chunk_rows, threads);
}

/// sum_g coefficient_g * graph_g over the union of edge sets. A graph whose
/// coefficient is exactly zero contributes no edges.
inline SparseItemGraph weighted_sum(std::span<const SparseItemGraph* const> graphs, std::span<const double> coefficients) {
  if (graphs.empty()) config_error(kModalityGraph, "weighted sum of zero graphs");
  if (graphs.size() != coefficients.size()) config_error(kModalityGraph, "one coefficient per graph required");
  const std::size_t n = graphs.front()->n_items();
  for (const auto* g : graphs)
    if (g->n_items() != n) config_error(kModalityGraph, "graph size mismatch");

  std::vector<std::vector<Edge>> rows(n);
  std::vector<Edge> merged;
  for (std::size_t i = 0; i < n; ++i) {
    merged.clear();
    for (std::size_t g = 0; g < graphs.size(); ++g) {
      if (coefficients[g] == 0.0) continue;
      for (const auto& e : graphs[g]->row(i)) merged.push_back({e.dst, coefficients[g] * e.weight});
    }
    std::stable_sort(merged.begin(), merged.end(), [](const Edge& a, const Edge& b) { return a.dst < b.dst; });
    auto& out = rows[i];
    for (const auto& e : merged) {
      if (!out.empty() && out.back().dst == e.dst)
        out.back().weight += e.weight;
      else
        out.push_back(e);
    }
  }
  return SparseItemGraph::from_rows(std::move(rows));
}

/// sigma * initial + (1 - sigma) * learned.
inline SparseItemGraph blend_graphs(const SparseItemGraph& initial, const SparseItemGraph& learned, double sigma) {
  if (!(sigma > 0.0 && sigma <= 1.0)) config_error(kModalityGraph, "sigma must lie in (0, 1]");
  if (initial.n_items() != learned.n_items()) config_error(kModalityGraph, "graph size mismatch");
  const std::array<const SparseItemGraph*, 2> gs{&initial, &learned};
  const std::array<double, 2> cs{sigma, 1.0 - sigma};
  return weighted_sum(gs, cs);
}

// ---------------------------------------------------------------------------
// Export: `src,dst,weight` CSV plus a JSON sidecar.

struct GraphMeta {
  std::size_t n_items = 0;
  std::size_t k = 0;
  double sigma = 0.0;
  std::string modality_id;
};

inline void write_graph(const SparseItemGraph& graph, const GraphMeta& meta, const std::string& csv_path) {
  std::string out = "src,dst,weight\n";
  for (std::size_t i = 0; i < graph.n_items(); ++i)
    for (const auto& e : graph.row(i))
      out += std::to_string(i) + "," + std::to_string(e.dst) + "," + io::format_double(e.weight) + "\n";
  io::write_file(csv_path, out, kModalityGraph);
  const nlohmann::ordered_json side = {
      {"n_items", meta.n_items}, {"k", meta.k}, {"sigma", meta.sigma}, {"modality_id", meta.modality_id}};
  io::write_file(csv_path + ".json", side.dump(2) + "\n", kModalityGraph);
}

inline std::pair<SparseItemGraph, GraphMeta> read_graph(const std::string& csv_path) {
  GraphMeta meta;
  try {
    const auto side = nlohmann::json::parse(io::read_file(csv_path + ".json", kModalityGraph));
    meta.n_items = side.at("n_items").get<std::size_t>();
    meta.k = side.at("k").get<std::size_t>();
    meta.sigma = side.at("sigma").get<double>();
    meta.modality_id = side.at("modality_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    input_error(kModalityGraph, "'" + csv_path + ".json': " + e.what());
  }
  const std::string text = io::read_file(csv_path, kModalityGraph);
  const auto lines = io::lines(text);
  std::vector<std::vector<Edge>> rows(meta.n_items);
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (io::trim(lines[ln]).empty()) continue;
    const auto f = io::split_csv(lines[ln]);
    std::optional<std::size_t> src, dst;
    std::optional<double> w;
    if (f && f->size() == 3) {
      src = io::parse_number<std::size_t>((*f)[0]);
      dst = io::parse_number<std::size_t>((*f)[1]);
      w = io::parse_number<double>((*f)[2]);
    }
    if (!src || !dst || !w || *src >= meta.n_items)
      input_error(kModalityGraph, "'" + csv_path + "' line " + std::to_string(ln + 1) + ": malformed row");
    rows[*src].push_back({*dst, *w});
  }
  return {SparseItemGraph::from_rows(std::move(rows)), meta};
}

}  // namespace mmrs
