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

#include "mmrs/eval.hpp"
#include "mmrs/ingest.hpp"
#include "mmrs/io.hpp"
#include "mmrs/model_train/optimizer.hpp"
#include "mmrs/model_train/params.hpp"
#include "mmrs/model_train/recommender.hpp"
#include "mmrs/model_train/sampler.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace mmrs {

struct EpochRecord {
  std::size_t epoch = 0;   // 1-based
  double loss = 0.0;       // mean BPR ranking loss over the epoch's triples
  double reg_loss = 0.0;   // mean L2 penalty, kept apart from the ranking loss
  double val_recall = std::numeric_limits<double>::quiet_NaN();
};

struct TrainHistory {
  std::size_t eval_k = 20;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // epoch whose parameters were kept; 0 = initialization
  bool early_stopped = false;

  /// `epoch,loss,val_recall@K`.
  std::string to_csv() const {
    std::string out = "epoch,loss,val_recall@" + std::to_string(eval_k) + "\n";
    for (const auto& e : epochs)
      out += std::to_string(e.epoch) + "," + io::format_double(e.loss) + "," + io::format_double(e.val_recall) + "\n";
    return out;
  }
};

struct TrainedModel {
  ModelParams params;
  TrainHistory history;
  std::uint64_t seed = 0;
  std::string rng_state;  // sampler state after the last completed epoch
};

/// Thrown when a loss, gradient or parameter turns non-finite. Carries the
/// last parameters that passed validation (or the initialization).
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& message, TrainedModel last_good)
      : Error(kModelTrain, ErrorKind::Runtime, message), last_good_(std::move(last_good)) {}
  const TrainedModel& last_good() const { return last_good_; }

 private:
  TrainedModel last_good_;
};

namespace detail {

inline std::string first_non_finite(const ModelParams& p) {
  auto copy = p;
  const auto views = tensors(copy);
  const auto names = tensor_names(p);
  for (std::size_t t = 0; t < views.size(); ++t)
    for (double v : views[t])
      if (!std::isfinite(v)) return names[t];
  return "none";
}

inline std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

}  // namespace detail

/// BPR training with minibatches of (u, i, j) triples.
///
/// Each epoch: model.begin_epoch, one negative draw per training positive
/// (times negatives_per_positive), shuffle, then one forward/backward/update
/// per batch in order. Validation recall@eval_k is recorded per epoch; the
/// best-validation parameters are returned and training stops after
/// `patience` epochs without improvement. Single-threaded, so a fixed seed
/// reproduces the run exactly.
template <RankingModel M>
TrainedModel train(M& model, const SplitBundle& splits, const TrainConfig& cfg) {
  cfg.validate();
  const InteractionSet& train_set = splits.train;
  if (train_set.empty()) config_error(kModelTrain, "empty training split");

  std::mt19937_64 init_rng(cfg.seed);
  ModelParams params = model.init_params(train_set.n_users, train_set.n_items, cfg, init_rng);
  std::mt19937_64 rng(cfg.seed ^ 0xA0761D6478BD642FULL);

  TrainedModel out;
  out.params = params;
  out.seed = cfg.seed;
  out.history.eval_k = cfg.eval_k;
  out.rng_state = detail::rng_text(rng);
  if (cfg.epochs == 0) return out;

  const UserItemIndex positives(train_set);
  const bool has_validation = !splits.validation.empty();
  Optimizer optimizer(cfg, params);
  double best_recall = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    model.begin_epoch(params, epoch);
    const auto triples = sample_triples(train_set, positives, cfg.negatives_per_positive, rng);
    double loss_sum = 0.0, reg_sum = 0.0;
    for (std::size_t b = 0; b < triples.size(); b += cfg.batch_size) {
      const auto batch = std::span(triples).subspan(b, std::min(cfg.batch_size, triples.size() - b));
      ModelParams grads = params.zeros_like();
      const BprLoss loss = loss_and_gradient(batch, params, model, cfg.l2_reg, grads);
      if (!std::isfinite(loss.total()) || !grads.all_finite()) {
        throw TrainingDiverged("non-finite loss or gradient at epoch " + std::to_string(epoch + 1) + ", batch " +
                                   std::to_string(b / cfg.batch_size + 1) + " (loss " +
                                   io::format_double(loss.total()) + ", first bad gradient: " +
                                   detail::first_non_finite(grads) + ")",
                               out);
      }
      optimizer.step(params, grads);
      loss_sum += loss.ranking * static_cast<double>(batch.size());
      reg_sum += loss.regularization * static_cast<double>(batch.size());
    }
    if (!params.all_finite())
      throw TrainingDiverged("parameters became non-finite at epoch " + std::to_string(epoch + 1) + " (" +
                                 detail::first_non_finite(params) + ")",
                             out);

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = loss_sum / static_cast<double>(triples.size());
    rec.reg_loss = reg_sum / static_cast<double>(triples.size());
    if (has_validation)
      rec.val_recall = mean_recall_at_k(params.user_emb, model.item_representations(params), positives,
                                        splits.validation, cfg.eval_k);
    out.history.epochs.push_back(rec);
    out.rng_state = detail::rng_text(rng);

    if (!has_validation || std::isnan(rec.val_recall)) {
      out.params = params;
      out.history.best_epoch = rec.epoch;
      continue;
    }
    if (rec.val_recall > best_recall) {
      best_recall = rec.val_recall;
      out.params = params;
      out.history.best_epoch = rec.epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      out.history.early_stopped = true;
      break;
    }
  }
  return out;
}

/// Graph-free baseline: BPR-trained dot-product factorization.
inline TrainedModel train_mf(const SplitBundle& splits, const TrainConfig& cfg) {
  MatrixFactorization mf;
  return train(mf, splits, cfg);
}

}  // namespace mmrs
