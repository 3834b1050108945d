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

#include "mmrs/cli/synthetic.hpp"
#include "mmrs/modality_graph.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

namespace mmrs {
namespace {

using testing::expect_error;
using testing::random_matrix;
using testing::TempDir;

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

TEST(Knn, MatchesDenseOracle) {
  std::mt19937_64 rng(101);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 2 + rng() % 60, d = 1 + rng() % 12;
    const std::size_t k = 1 + rng() % (n - 1);
    const Matrix h = random_matrix(n, d, rng);
    const auto g = build_knn_graph(h, k, 1 + rng() % 16);
    EXPECT_LE(oracle::compare_graph(g, oracle::dense_knn(h, k)), 1e-12);
    EXPECT_LE(oracle::compare_graph(normalize_adjacency(g), oracle::dense_normalize(oracle::dense_knn(h, k))), 1e-12);
  }
}

TEST(Knn, IndependentOfChunkingAndThreads) {
  std::mt19937_64 rng(5);
  const Matrix h = random_matrix(97, 7, rng);
  const auto ref = build_knn_graph(h, 9, 1024, 1);
  EXPECT_EQ(build_knn_graph(h, 9, 10, 1), ref);
  EXPECT_EQ(build_knn_graph(h, 9, 7, 4), ref);
}

TEST(Knn, TiesGoToSmallerIndex) {
  // Rows 1, 2 and 3 are all identical to row 0.
  const Matrix h = rows({{1, 0}, {2, 0}, {3, 0}, {5, 0}, {0, 1}});
  const auto g = build_knn_graph(h, 2);
  ASSERT_EQ(g.row(0).size(), 2u);
  EXPECT_EQ(g.row(0)[0].dst, 1u);
  EXPECT_EQ(g.row(0)[1].dst, 2u);
  EXPECT_EQ(g.row(3)[0].dst, 0u);
  EXPECT_EQ(g.row(3)[1].dst, 1u);
}

TEST(Knn, ZeroAndOrthogonalRowsGetNoEdges) {
  const Matrix h = rows({{1, 0}, {0, 0}, {0, 1}, {1, 0.5}});
  const auto g = build_knn_graph(h, 2);
  EXPECT_TRUE(g.row(1).empty());
  for (std::size_t i = 0; i < 4; ++i)
    for (const auto& e : g.row(i)) EXPECT_NE(e.dst, 1u);
  // Row 0 sees only row 3; rows 0 and 2 are orthogonal.
  ASSERT_EQ(g.row(0).size(), 1u);
  EXPECT_EQ(g.row(0)[0].dst, 3u);
}

TEST(Knn, InvalidArguments) {
  const Matrix h = rows({{1, 0}, {0, 1}, {1, 1}});
  expect_error([&] { build_knn_graph(h, 0); }, ErrorKind::Config, "k must satisfy");
  expect_error([&] { build_knn_graph(h, 3); }, ErrorKind::Config, "k must satisfy");
  Matrix bad = h;
  bad(1, 1) = std::nan("");
  expect_error([&] { build_knn_graph(bad, 1); }, ErrorKind::Config, "finite");
}

TEST(Knn, BlockFeaturesStayInsideBlocks) {
  SyntheticSpec spec;
  spec.n_users = 40;
  spec.n_items = 60;
  spec.blocks = 2;
  spec.noise = 0.0;
  const auto data = make_synthetic(spec);
  const std::size_t block_size = 30;
  for (const auto& f : data.features) {
    const auto g = build_knn_graph(f, block_size - 1);
    for (std::size_t i = 0; i < g.n_items(); ++i)
      for (const auto& e : g.row(i)) EXPECT_EQ(data.item_block[e.dst], data.item_block[i]);
  }
}

TEST(Normalize, RowSumOfSymmetricGraphBounded) {
  // For a symmetric nonnegative matrix, D^-1/2 M D^-1/2 has spectral radius 1.
  std::mt19937_64 rng(3);
  const Matrix h = random_matrix(30, 4, rng);
  const auto g = build_knn_graph(h, 29);  // every positive-cosine pair: symmetric pattern
  const Matrix a = normalize_adjacency(g).to_dense();
  EXPECT_TRUE(a.isApprox(a.transpose(), 1e-12));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  EXPECT_NEAR(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0, 1e-9);
}

TEST(Normalize, PreservesPatternAndHandlesZeroDegree) {
  auto g = SparseItemGraph::from_rows({{{1, 0.0}}, {{0, 2.0}, {2, 2.0}}, {}});
  const auto n = normalize_adjacency(g);
  EXPECT_TRUE(n.same_pattern(g));
  EXPECT_EQ(n.weight(0, 1), 0.0);  // source has degree 0
  EXPECT_EQ(n.weight(1, 2), 0.0);  // target has degree 0
  EXPECT_EQ(n.weight(1, 0), 0.0);  // target has degree 0
}

TEST(Graph, FromRowsValidates) {
  expect_error([] { SparseItemGraph::from_rows({{{0, 1.0}}}); }, ErrorKind::Config, "self-loop");
  expect_error([] { SparseItemGraph::from_rows({{{1, 1.0}, {1, 2.0}}, {}}); }, ErrorKind::Config, "duplicate");
  expect_error([] { SparseItemGraph::from_rows({{{1, -1.0}}, {}}); }, ErrorKind::Config, "negative");
  expect_error([] { SparseItemGraph::from_rows({{{4, 1.0}}, {}}); }, ErrorKind::Config, "out of range");
}

TEST(Blend, LinearCombinationOverUnionOfEdges) {
  std::mt19937_64 rng(9);
  const Matrix h1 = random_matrix(25, 5, rng), h2 = random_matrix(25, 5, rng);
  const auto a = normalize_adjacency(build_knn_graph(h1, 4));
  const auto b = normalize_adjacency(build_knn_graph(h2, 6));
  const auto c = blend_graphs(a, b, 0.3);
  EXPECT_TRUE(c.to_dense().isApprox(0.3 * a.to_dense() + 0.7 * b.to_dense(), 1e-14));
  EXPECT_EQ(blend_graphs(a, b, 1.0), a);  // zero coefficient adds no edges
  expect_error([&] { blend_graphs(a, b, 0.0); }, ErrorKind::Config, "sigma");
}

TEST(Transform, AffineMap) {
  std::mt19937_64 rng(4);
  const Matrix h = random_matrix(6, 3, rng);
  ModalityTransform t{random_matrix(2, 3, rng), Vector::Random(2)};
  const Matrix out = transform_features(h, t);
  for (Eigen::Index i = 0; i < 6; ++i)
    EXPECT_TRUE(out.row(i).transpose().isApprox(t.weight * h.row(i).transpose() + t.bias, 1e-14));
  EXPECT_EQ(transform_features(h, ModalityTransform::identity(3)), h);
  ModalityTransform wrong{Matrix::Zero(2, 4), Vector::Zero(2)};
  expect_error([&] { transform_features(h, wrong); }, ErrorKind::Config, "dimension mismatch");
}

TEST(Export, CsvRoundTrip) {
  TempDir tmp;
  std::mt19937_64 rng(2);
  const auto g = normalize_adjacency(build_knn_graph(random_matrix(20, 3, rng), 5));
  write_graph(g, {20, 5, 0.7, "text"}, tmp.file("g.csv"));
  const auto [back, meta] = read_graph(tmp.file("g.csv"));
  EXPECT_EQ(back, g);
  EXPECT_EQ(meta.k, 5u);
  EXPECT_EQ(meta.modality_id, "text");
}

TEST(GraphConfig, Validation) {
  GraphConfig c;
  EXPECT_NO_THROW(c.validate(20));
  c.k = 20;
  expect_error([&] { c.validate(20); }, ErrorKind::Config, "k must satisfy");
  c.k = 5;
  c.sigma = 1.5;
  expect_error([&] { c.validate(20); }, ErrorKind::Config, "sigma");
  c.sigma = 0.5;
  c.rounds = 2;
  expect_error([&] { c.validate(20); }, ErrorKind::Config, "graph_rounds");
}

}  // namespace
}  // namespace mmrs
