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
#include "mmrs/model_train.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

namespace mmrs {
namespace {

using testing::expect_error;
using testing::TempDir;

InteractionSet make_set(std::size_t n_users, std::size_t n_items, std::vector<std::pair<std::size_t, std::size_t>> pairs) {
  std::sort(pairs.begin(), pairs.end());
  InteractionSet s;
  s.n_users = n_users;
  s.n_items = n_items;
  for (auto [u, i] : pairs) s.records.push_back({u, i, 1.0, std::nullopt});
  return s;
}

// Two user groups, each interacting only with its own half of the catalog.
// Per user: 8 training items, 1 validation item, 1 test item.
SplitBundle separable_splits() {
  const std::size_t n_users = 40, n_items = 20;
  std::vector<std::pair<std::size_t, std::size_t>> tr, va, te;
  for (std::size_t u = 0; u < n_users; ++u) {
    const std::size_t base = (u % 2) * 10;
    for (std::size_t k = 0; k < 10; ++k) {
      const std::size_t item = base + (k + u) % 10;
      (k < 8 ? tr : k == 8 ? va : te).emplace_back(u, item);
    }
  }
  SplitBundle b;
  b.train = make_set(n_users, n_items, tr);
  b.validation = make_set(n_users, n_items, va);
  b.test = make_set(n_users, n_items, te);
  return b;
}

TEST(GradientCheck, GraphModelMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const auto g = oracle::random_grad_instance(seed);
    GraphRecommender model(g.features, g.graph, g.conv);
    model.begin_epoch(g.params, 0);
    const auto r = oracle::gradient_check(model, g.params, g.triples, 0.01);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed;
    EXPECT_GT(r.n_checked, 0u);
  }
}

TEST(GradientCheck, MatrixFactorization) {
  std::mt19937_64 rng(3);
  TrainConfig cfg;
  cfg.dim = 4;
  cfg.init_scale = 0.5;
  MatrixFactorization mf;
  const auto p = mf.init_params(5, 7, cfg, rng);
  const std::vector<BprTriple> t{{0, 1, 2}, {3, 4, 0}, {4, 6, 5}, {0, 2, 1}};
  EXPECT_LT(oracle::gradient_check(mf, p, t, 0.05).max_rel_error, 1e-6);
}

TEST(Bpr, SaturatedMarginHasNoRankingGradient) {
  ModelParams p;
  p.user_emb = Matrix::Constant(1, 2, 10.0);
  p.item_emb.resize(3, 2);
  p.item_emb << 5, 5, -5, -5, 0.3, 0.1;
  ModelParams g = p.zeros_like();
  const std::vector<BprTriple> t{{0, 0, 1}};
  const auto loss = loss_and_gradient(t, p, MatrixFactorization{}, 0.0, g);
  EXPECT_LT(loss.ranking, 1e-80);
  EXPECT_LT(g.user_emb.cwiseAbs().maxCoeff(), 1e-80);
  EXPECT_LT(g.item_emb.cwiseAbs().maxCoeff(), 1e-80);
}

TEST(Bpr, UntouchedRowsGetZeroGradient) {
  std::mt19937_64 rng(8);
  TrainConfig cfg;
  cfg.dim = 3;
  const auto p = MatrixFactorization{}.init_params(4, 6, cfg, rng);
  ModelParams g = p.zeros_like();
  const std::vector<BprTriple> t{{0, 1, 2}, {1, 3, 1}};
  loss_and_gradient(t, p, MatrixFactorization{}, 0.1, g);
  for (Eigen::Index i : {0, 4, 5}) EXPECT_EQ(g.item_emb.row(i).norm(), 0.0);
  for (Eigen::Index u : {2, 3}) EXPECT_EQ(g.user_emb.row(u).norm(), 0.0);
  EXPECT_GT(g.item_emb.row(3).norm(), 0.0);
}

TEST(Bpr, LossAtZeroMarginIsLn2) {
  ModelParams p;
  p.user_emb = Matrix::Zero(2, 3);
  p.item_emb = Matrix::Ones(3, 3);
  const std::vector<BprTriple> t{{0, 0, 1}, {1, 2, 0}};
  const auto l = bpr_loss(t, p, MatrixFactorization{}, 0.5);
  EXPECT_NEAR(l.ranking, std::log(2.0), 1e-15);
  EXPECT_NEAR(l.regularization, 0.5 * 6.0, 1e-15);  // two triples, 3 + 3 each, averaged
  EXPECT_NEAR(neg_log_sigmoid(-800.0), 800.0, 1e-12);
  EXPECT_TRUE(std::isfinite(neg_log_sigmoid(800.0)));
}

TEST(Sampler, NegativesAvoidPositives) {
  const auto s = make_set(3, 8, {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 4}, {1, 5}, {1, 6}, {2, 3}});
  const UserItemIndex idx(s);
  std::mt19937_64 rng(1);
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t j : sample_negatives(idx, 8, u, 200, rng)) EXPECT_FALSE(idx.contains(u, j));
  // User 1 has only item 7 left, via the complement branch.
  for (std::size_t j : sample_negatives(idx, 8, 1, 20, rng)) EXPECT_EQ(j, 7u);
  const auto full = make_set(1, 2, {{0, 0}, {0, 1}});
  expect_error([&] { sample_negatives(UserItemIndex(full), 2, 0, 1, rng); }, ErrorKind::Runtime,
               "interacted with every item");
}

TEST(Sampler, OneTriplePerPositivePerDraw) {
  const auto s = make_set(2, 5, {{0, 0}, {0, 3}, {1, 2}});
  std::mt19937_64 rng(2);
  const auto t = sample_triples(s, UserItemIndex(s), 3, rng);
  EXPECT_EQ(t.size(), 9u);
  std::map<std::pair<std::size_t, std::size_t>, int> seen;
  for (const auto& x : t) ++seen[{x.u, x.i}];
  for (const auto& [k, c] : seen) EXPECT_EQ(c, 3);
}

TEST(Optimizer, SgdAndAdamFirstStep) {
  ModelParams p;
  p.user_emb = Matrix::Constant(1, 2, 1.0);
  p.item_emb = Matrix::Constant(1, 2, 1.0);
  ModelParams g = p.zeros_like();
  g.user_emb << 2.0, -0.5;
  g.item_emb << 1e-3, 0.0;

  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.optimizer = OptimizerKind::Sgd;
  ModelParams s = p;
  Optimizer(cfg, p).step(s, g);
  EXPECT_DOUBLE_EQ(s.user_emb(0, 0), 0.8);
  EXPECT_DOUBLE_EQ(s.user_emb(0, 1), 1.05);

  // Bias-corrected Adam moves every coordinate by about lr * sign(g) on step one.
  cfg.optimizer = OptimizerKind::Adam;
  ModelParams a = p;
  Optimizer(cfg, p).step(a, g);
  EXPECT_NEAR(a.user_emb(0, 0), 0.9, 1e-7);
  EXPECT_NEAR(a.user_emb(0, 1), 1.1, 1e-7);
  EXPECT_NEAR(a.item_emb(0, 0), 0.9, 1e-5);
  EXPECT_EQ(a.item_emb(0, 1), 1.0);
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 64;
  cfg.epochs = 50;
  cfg.l2_reg = 1e-5;
  cfg.patience = 0;
  cfg.eval_k = 5;
  return cfg;
}

TEST(Train, SeparableDataConverges) {
  const auto splits = separable_splits();
  const auto r = train_mf(splits, quick_config());
  ASSERT_EQ(r.history.epochs.size(), 50u);
  for (std::size_t e = 1; e < 5; ++e) EXPECT_LT(r.history.epochs[e].loss, r.history.epochs[e - 1].loss);
  double best = 0.0;
  for (const auto& e : r.history.epochs) best = std::max(best, e.val_recall);
  EXPECT_GE(best, 0.9);
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  const auto splits = separable_splits();
  auto cfg = quick_config();
  cfg.epochs = 0;
  const auto r = train_mf(splits, cfg);
  std::mt19937_64 rng(cfg.seed);
  EXPECT_EQ(r.params, MatrixFactorization{}.init_params(40, 20, cfg, rng));
  EXPECT_TRUE(r.history.epochs.empty());
  EXPECT_EQ(r.history.best_epoch, 0u);
}

TEST(Train, SameSeedSameResult) {
  SyntheticSpec spec;
  spec.n_users = 60;
  spec.n_items = 40;
  spec.blocks = 4;
  const auto data = make_synthetic(spec);
  const auto splits = split_dataset(data.interactions, {0.8, 0.1, 0.1}, 3);
  auto cfg = quick_config();
  cfg.epochs = 4;
  GraphConfig gc;
  gc.k = 5;
  const auto run = [&] {
    GraphRecommender m(data.features, gc, ConvConfig{});
    return train(m, splits, cfg);
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.history.to_csv(), b.history.to_csv());
  EXPECT_EQ(a.rng_state, b.rng_state);
  cfg.seed = 43;
  GraphRecommender m(data.features, gc, ConvConfig{});
  EXPECT_FALSE(train(m, splits, cfg).params == a.params);
}

TEST(Train, RankOneFourByFour) {
  // Preference sign(a_u * b_i) with a = b = (1, 1, -1, -1).
  std::vector<std::pair<std::size_t, std::size_t>> pos{{0, 0}, {0, 1}, {1, 0}, {1, 1}, {2, 2}, {2, 3}, {3, 2}, {3, 3}};
  SplitBundle b;
  b.train = make_set(4, 4, pos);
  b.validation = b.train.empty_like();
  b.test = b.train.empty_like();
  TrainConfig cfg;
  cfg.dim = 1;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 8;
  cfg.epochs = 300;
  cfg.l2_reg = 0.0;
  cfg.init_scale = 0.5;
  const auto r = train_mf(b, cfg);
  const UserItemIndex idx(b.train);
  const Matrix s = r.params.user_emb * r.params.item_emb.transpose();
  for (std::size_t u = 0; u < 4; ++u)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        if (idx.contains(u, i) && !idx.contains(u, j))
          EXPECT_GT(s(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(i)),
                    s(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(j)));
}

TEST(Train, GraphModelWithoutGraphIsMatrixFactorization) {
  SyntheticSpec spec;
  spec.n_users = 50;
  spec.n_items = 30;
  spec.blocks = 3;
  const auto data = make_synthetic(spec);
  const auto splits = split_dataset(data.interactions, {0.8, 0.1, 0.1}, 2);
  auto cfg = quick_config();
  cfg.epochs = 6;
  GraphRecommender g(data.features, GraphConfig{}, ConvConfig{0, false});
  const auto a = train(g, splits, cfg);
  const auto b = train_mf(splits, cfg);
  ASSERT_EQ(a.history.epochs.size(), b.history.epochs.size());
  for (std::size_t e = 0; e < a.history.epochs.size(); ++e)
    EXPECT_NEAR(a.history.epochs[e].loss, b.history.epochs[e].loss, 1e-12);
  EXPECT_EQ(a.params, b.params);
}

TEST(Train, DivergenceIsReported) {
  const auto splits = separable_splits();
  auto cfg = quick_config();
  cfg.init_scale = 1e160;
  try {
    train_mf(splits, cfg);
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Runtime);
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
    EXPECT_EQ(e.last_good().params.n_users(), 40u);
  }
}

TEST(Train, RejectsBadConfig) {
  const auto splits = separable_splits();
  auto cfg = quick_config();
  cfg.learning_rate = 0.0;
  expect_error([&] { train_mf(splits, cfg); }, ErrorKind::Config, "learning_rate");
  cfg = quick_config();
  SplitBundle empty;
  empty.train = splits.train.empty_like();
  expect_error([&] { train_mf(empty, cfg); }, ErrorKind::Config, "empty training split");
}

Checkpoint sample_checkpoint() {
  const auto g = oracle::random_grad_instance(5);
  Checkpoint ck;
  ck.params = g.params;
  ck.config = "[model_train]\ndim = 4\n";
  ck.seed = 99;
  ck.rng_state = "1 2 3";
  for (const auto& f : g.features) ck.modality_ids.push_back(f.modality_id);
  return ck;
}

TEST(Checkpoint, RoundTripIsBitwise) {
  TempDir tmp;
  const auto ck = sample_checkpoint();
  save_checkpoint(ck, tmp.file("m.mmck"));
  const auto back = load_checkpoint(tmp.file("m.mmck"));
  EXPECT_EQ(back, ck);
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(ck));
}

TEST(Checkpoint, TruncatedOrCorrupt) {
  const std::string bytes = encode_checkpoint(sample_checkpoint());
  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1})
    expect_error([&] { decode_checkpoint(bytes.substr(0, cut)); }, ErrorKind::Input, "checkpoint");
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  expect_error([&] { decode_checkpoint(flipped); }, ErrorKind::Input, "truncated or corrupt");
  expect_error([&] { decode_checkpoint(bytes + "x"); }, ErrorKind::Input, "truncated or corrupt");
  expect_error([&] { decode_checkpoint("NOTCK" + bytes.substr(5)); }, ErrorKind::Input, "bad magic");
}

TEST(Checkpoint, VersionMismatch) {
  std::string bytes = encode_checkpoint(sample_checkpoint());
  bytes[kCheckpointMagic.size()] = 7;
  expect_error([&] { decode_checkpoint(bytes); }, ErrorKind::Input, "unsupported checkpoint version 7");
}

TEST(Checkpoint, ShapeMismatchNamesBothShapes) {
  const auto ck = sample_checkpoint();
  ModelParams other = ck.params;
  other.user_emb = Matrix::Zero(other.user_emb.rows() + 1, other.user_emb.cols());
  EXPECT_NO_THROW(check_checkpoint_shape(ck.params, ck.params));
  expect_error([&] { check_checkpoint_shape(ck.params, other); }, ErrorKind::Config, "checkpoint shape mismatch");
}

TEST(Checkpoint, MissingFile) {
  expect_error([] { load_checkpoint("/nonexistent/model.mmck"); }, ErrorKind::Input, "/nonexistent/model.mmck");
}

}  // namespace
}  // namespace mmrs
