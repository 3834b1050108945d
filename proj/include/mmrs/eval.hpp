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

// Ranking and error metrics, and the all-ranking evaluation protocol.
//
// The per-list metrics are templates over the number type so they can be
// evaluated in exact arithmetic; they take the ranked list best-first and the
// relevant items as a sorted span.

#pragma once

#include "mmrs/core.hpp"
#include "mmrs/ingest.hpp"
#include "mmrs/io.hpp"
#include "mmrs/model_train/recommender.hpp"
#include "mmrs/model_train/sampler.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace mmrs {

inline constexpr std::string_view kEval = "eval";

inline void check_paired(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.empty() || actual.empty()) config_error(kEval, "empty prediction lists");
  if (predicted.size() != actual.size()) config_error(kEval, "prediction lists differ in length");
}

inline double mae(std::span<const double> predicted, std::span<const double> actual) {
  check_paired(predicted, actual);
  double s = 0.0;
  for (std::size_t k = 0; k < predicted.size(); ++k) s += std::abs(predicted[k] - actual[k]);
  return s / static_cast<double>(predicted.size());
}

inline double rmse(std::span<const double> predicted, std::span<const double> actual) {
  check_paired(predicted, actual);
  double s = 0.0;
  for (std::size_t k = 0; k < predicted.size(); ++k) s += (predicted[k] - actual[k]) * (predicted[k] - actual[k]);
  return std::sqrt(s / static_cast<double>(predicted.size()));
}

/// Candidate items for one user, best first; excluded items never appear.
struct RankedList {
  std::size_t user = 0;
  std::vector<std::size_t> items;
};

namespace detail {

inline void check_list_args(std::span<const std::size_t> relevant, std::size_t k) {
  if (k < 1) config_error(kEval, "k must be >= 1");
  if (relevant.empty()) config_error(kEval, "empty relevant set (users without held-out items are skipped)");
}

inline bool is_relevant(std::span<const std::size_t> relevant, std::size_t item) {
  return std::binary_search(relevant.begin(), relevant.end(), item);
}

template <class Real>
Real count(std::size_t n) {
  return Real(static_cast<long long>(n));
}

}  // namespace detail

template <class Real = double>
struct PrecisionRecall {
  Real precision;
  Real recall;
};

/// precision = hits / k, recall = hits / |relevant|, hits counted in the top k.
template <class Real = double>
PrecisionRecall<Real> precision_recall_at_k(std::span<const std::size_t> ranked, std::span<const std::size_t> relevant,
                                            std::size_t k) {
  detail::check_list_args(relevant, k);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) hits += detail::is_relevant(relevant, ranked[r]);
  return {detail::count<Real>(hits) / detail::count<Real>(k),
          detail::count<Real>(hits) / detail::count<Real>(relevant.size())};
}

/// Hit-position form: (1 / min(|relevant|, k)) * sum over hits at rank r <= k of P@r.
template <class Real = double>
Real average_precision(std::span<const std::size_t> ranked, std::span<const std::size_t> relevant, std::size_t k) {
  detail::check_list_args(relevant, k);
  Real sum = detail::count<Real>(0);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
    if (!detail::is_relevant(relevant, ranked[r])) continue;
    ++hits;
    sum = sum + detail::count<Real>(hits) / detail::count<Real>(r + 1);
  }
  return sum / detail::count<Real>(std::min(relevant.size(), k));
}

/// Threshold form over the n = min(k, |ranked|) cutoffs, taken from the
/// deepest to the shallowest: AP = sum_{t<n} [R(t) - R(t+1)] * P(t), with the
/// sentinels R(n) = 0 and P(n) = 1. Recall is measured against
/// min(|relevant|, k) so both forms agree on truncated lists.
template <class Real = double>
Real average_precision_threshold_form(std::span<const std::size_t> ranked, std::span<const std::size_t> relevant,
                                      std::size_t k) {
  detail::check_list_args(relevant, k);
  const std::size_t n = std::min(k, ranked.size());
  const std::size_t denom = std::min(relevant.size(), k);
  // hits_at[c] = relevant items among the first c.
  std::vector<std::size_t> hits_at(n + 1, 0);
  for (std::size_t c = 1; c <= n; ++c) hits_at[c] = hits_at[c - 1] + detail::is_relevant(relevant, ranked[c - 1]);
  const auto recall = [&](std::size_t t) {
    return t == n ? detail::count<Real>(0) : detail::count<Real>(hits_at[n - t]) / detail::count<Real>(denom);
  };
  const auto precision = [&](std::size_t t) {
    return t == n ? detail::count<Real>(1) : detail::count<Real>(hits_at[n - t]) / detail::count<Real>(n - t);
  };
  Real ap = detail::count<Real>(0);
  for (std::size_t t = 0; t < n; ++t) ap = ap + (recall(t) - recall(t + 1)) * precision(t);
  return ap;
}

/// Binary-gain NDCG: DCG = sum_{hit at rank r <= k} 1/log2(r+1), normalized by
/// the DCG of min(k, |relevant|) hits at the top.
inline double ndcg_at_k(std::span<const std::size_t> ranked, std::span<const std::size_t> relevant, std::size_t k) {
  detail::check_list_args(relevant, k);
  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r)
    if (detail::is_relevant(relevant, ranked[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, relevant.size()); ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

/// Top `depth` items by descending score (ties: smaller index first), never
/// returning an item listed in `excluded` (sorted).
inline std::vector<std::size_t> rank_items(std::span<const double> scores, std::span<const std::size_t> excluded,
                                           std::size_t depth) {
  std::vector<std::size_t> cand;
  cand.reserve(scores.size());
  std::size_t e = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    while (e < excluded.size() && excluded[e] < j) ++e;
    if (e < excluded.size() && excluded[e] == j) continue;
    cand.push_back(j);
  }
  const auto better = [&](std::size_t a, std::size_t b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; };
  depth = std::min(depth, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(depth), cand.end(), better);
  cand.resize(depth);
  return cand;
}

// ---------------------------------------------------------------------------
// All-ranking protocol

enum class Segment { All, Warm, Cold };

inline std::string_view to_string(Segment s) {
  switch (s) {
    case Segment::All: return "all";
    case Segment::Warm: return "warm";
    case Segment::Cold: return "cold";
  }
  return "?";
}

enum class EvalTarget { Test, Validation };

struct EvalConfig {
  std::vector<std::size_t> ks{5, 10, 15};
  std::uint64_t seed = 7;          // negative draws for MAE/RMSE
  bool mask_validation = true;     // also hide validation positives when ranking for the test split
  EvalTarget target = EvalTarget::Test;
};

inline constexpr std::string_view kEvalProtocol =
    "all-ranking: every item outside the user's training interactions (and validation interactions when "
    "scoring the test split) is ranked by inner-product score, ties to the smaller item index; binary "
    "relevance; users without held-out items are skipped; metrics are means over evaluated users. "
    "MAE/RMSE: predicted = sigmoid(score), actual = 1 for each held-out positive and 0 for an equal number of "
    "seeded uniform draws from the user's unobserved items.";

struct RankMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double ndcg = 0.0;
  double map = 0.0;
};

/// Everything computed for one evaluated user.
struct UserMetrics {
  std::size_t user = 0;
  std::map<std::size_t, RankMetrics> at_k;  // keyed by requested K
  std::vector<double> predicted;            // MAE/RMSE pairs
  std::vector<double> actual;
};

struct SegmentReport {
  Segment segment = Segment::All;
  std::size_t n_users = 0;
  double mae = 0.0;
  double rmse = 0.0;
  std::map<std::size_t, RankMetrics> at_k;
};

struct EvalReport {
  std::string protocol{kEvalProtocol};
  std::vector<std::size_t> ks;
  std::vector<SegmentReport> segments;
  std::vector<std::string> warnings;

  const SegmentReport* segment(Segment s) const {
    for (const auto& r : segments)
      if (r.segment == s) return &r;
    return nullptr;
  }

  std::string to_json() const {
    nlohmann::ordered_json j;
    j["protocol"] = protocol;
    j["ks"] = ks;
    j["segments"] = nlohmann::ordered_json::array();
    for (const auto& s : segments) {
      nlohmann::ordered_json js;
      js["segment"] = std::string(to_string(s.segment));
      js["n_users_evaluated"] = s.n_users;
      js["mae"] = s.mae;
      js["rmse"] = s.rmse;
      js["metrics"] = nlohmann::ordered_json::object();
      for (const auto& [k, m] : s.at_k)
        js["metrics"][std::to_string(k)] = {
            {"precision", m.precision}, {"recall", m.recall}, {"ndcg", m.ndcg}, {"map", m.map}};
      j["segments"].push_back(js);
    }
    j["warnings"] = warnings;
    return j.dump(2) + "\n";
  }

  /// `segment,K,metric,value`; K is empty for the per-segment rows.
  std::string to_csv() const {
    std::string out = "segment,K,metric,value\n";
    for (const auto& s : segments) {
      const std::string seg(to_string(s.segment));
      out += seg + ",,n_users," + std::to_string(s.n_users) + "\n";
      out += seg + ",,mae," + io::format_double(s.mae) + "\n";
      out += seg + ",,rmse," + io::format_double(s.rmse) + "\n";
      for (const auto& [k, m] : s.at_k) {
        const std::string prefix = seg + "," + std::to_string(k) + ",";
        out += prefix + "precision," + io::format_double(m.precision) + "\n";
        out += prefix + "recall," + io::format_double(m.recall) + "\n";
        out += prefix + "ndcg," + io::format_double(m.ndcg) + "\n";
        out += prefix + "map," + io::format_double(m.map) + "\n";
      }
    }
    return out;
  }
};

namespace detail {

inline std::vector<std::vector<std::size_t>> items_by_user(const InteractionSet& set) {
  std::vector<std::vector<std::size_t>> out(set.n_users);
  for (const auto& r : set.records) out[r.user].push_back(r.item);
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

inline std::vector<double> user_scores(const Matrix& user_emb, const Matrix& item_repr, std::size_t u) {
  const Vector s = item_repr * user_emb.row(static_cast<Eigen::Index>(u)).transpose();
  return std::vector<double>(s.data(), s.data() + s.size());
}

inline void check_view(const Matrix& user_emb, const Matrix& item_repr, const InteractionSet& set) {
  if (static_cast<std::size_t>(user_emb.rows()) != set.n_users ||
      static_cast<std::size_t>(item_repr.rows()) != set.n_items || user_emb.cols() != item_repr.cols())
    config_error(kEval, "model shape does not match the dataset");
}

}  // namespace detail

/// Mean recall@k over users with a non-empty `target`, ranking everything
/// outside `exclude`. Used for per-epoch validation.
inline double mean_recall_at_k(const Matrix& user_emb, const Matrix& item_repr, const UserItemIndex& exclude,
                               const InteractionSet& target, std::size_t k) {
  detail::check_view(user_emb, item_repr, target);
  const auto relevant = detail::items_by_user(target);
  std::vector<double> per_user(target.n_users, std::numeric_limits<double>::quiet_NaN());
  constexpr std::size_t kBlock = 64;
  parallel_for((target.n_users + kBlock - 1) / kBlock, [&](std::size_t b) {
    for (std::size_t u = b * kBlock; u < std::min(target.n_users, (b + 1) * kBlock); ++u) {
      if (relevant[u].empty()) continue;
      const auto scores = detail::user_scores(user_emb, item_repr, u);
      const auto ranked = rank_items(scores, exclude.items(u), k);
      per_user[u] = precision_recall_at_k<double>(ranked, relevant[u], k).recall;
    }
  });
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : per_user)
    if (!std::isnan(v)) {
      sum += v;
      ++n;
    }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

/// Per-user metrics for every user with held-out items in the target split,
/// ordered by user index. K larger than a user's candidate count is clamped
/// (one warning per distinct K).
inline std::vector<UserMetrics> per_user_metrics(const Matrix& user_emb, const Matrix& item_repr,
                                                 const SplitBundle& splits, const EvalConfig& cfg,
                                                 std::vector<std::string>* warnings = nullptr) {
  if (cfg.ks.empty()) config_error(kEval, "no cutoffs requested");
  for (std::size_t k : cfg.ks)
    if (k < 1) config_error(kEval, "cutoffs must be >= 1");
  const InteractionSet& target = cfg.target == EvalTarget::Test ? splits.test : splits.validation;
  detail::check_view(user_emb, item_repr, target);

  std::vector<const InteractionSet*> masked{&splits.train};
  if (cfg.target == EvalTarget::Test && cfg.mask_validation) masked.push_back(&splits.validation);
  const UserItemIndex exclude(target.n_users, masked);
  const UserItemIndex observed(target.n_users, std::array<const InteractionSet*, 3>{&splits.train, &splits.validation,
                                                                                   &splits.test});
  const auto relevant = detail::items_by_user(target);
  const std::size_t depth = *std::max_element(cfg.ks.begin(), cfg.ks.end());

  std::vector<std::optional<UserMetrics>> slots(target.n_users);
  std::vector<std::set<std::size_t>> clamped(target.n_users);
  constexpr std::size_t kBlock = 64;
  parallel_for((target.n_users + kBlock - 1) / kBlock, [&](std::size_t b) {
    for (std::size_t u = b * kBlock; u < std::min(target.n_users, (b + 1) * kBlock); ++u) {
      if (relevant[u].empty()) continue;
      const auto scores = detail::user_scores(user_emb, item_repr, u);
      const auto ranked = rank_items(scores, exclude.items(u), depth);
      const std::size_t candidates = target.n_items - exclude.count(u);
      UserMetrics m;
      m.user = u;
      for (std::size_t k : cfg.ks) {
        std::size_t k_eff = k;
        if (k > candidates) {
          clamped[u].insert(k);
          k_eff = std::max<std::size_t>(1, candidates);
        }
        const auto pr = precision_recall_at_k<double>(ranked, relevant[u], k_eff);
        m.at_k[k] = {pr.precision, pr.recall, ndcg_at_k(ranked, relevant[u], k_eff),
                     average_precision<double>(ranked, relevant[u], k_eff)};
      }
      for (std::size_t i : relevant[u]) {
        m.predicted.push_back(sigmoid(scores[i]));
        m.actual.push_back(1.0);
      }
      if (observed.count(u) < target.n_items) {
        std::mt19937_64 rng(cfg.seed ^ (0x9E3779B97F4A7C15ULL * (u + 1)));
        for (std::size_t j : sample_negatives(observed, target.n_items, u, relevant[u].size(), rng)) {
          m.predicted.push_back(sigmoid(scores[j]));
          m.actual.push_back(0.0);
        }
      }
      slots[u] = std::move(m);
    }
  });

  std::vector<UserMetrics> out;
  std::set<std::size_t> all_clamped;
  for (std::size_t u = 0; u < slots.size(); ++u) {
    if (slots[u]) out.push_back(std::move(*slots[u]));
    all_clamped.insert(clamped[u].begin(), clamped[u].end());
  }
  if (warnings)
    for (std::size_t k : all_clamped)
      warnings->push_back("K=" + std::to_string(k) + " exceeds the candidate count for some users; clamped");
  return out;
}

inline bool in_segment(const SplitBundle& splits, std::size_t user, Segment s) {
  switch (s) {
    case Segment::All: return true;
    case Segment::Cold: return splits.is_cold_user(user);
    case Segment::Warm: return !splits.is_cold_user(user);
  }
  return false;
}

/// Averages per-user metrics over the users of one segment.
inline SegmentReport aggregate_segment(std::span<const UserMetrics> users, const SplitBundle& splits,
                                       const std::vector<std::size_t>& ks, Segment segment) {
  SegmentReport r;
  r.segment = segment;
  for (std::size_t k : ks) r.at_k[k] = {};
  std::vector<double> pred, act;
  for (const auto& m : users) {
    if (!in_segment(splits, m.user, segment)) continue;
    ++r.n_users;
    for (std::size_t k : ks) {
      auto& a = r.at_k[k];
      const auto& v = m.at_k.at(k);
      a.precision += v.precision;
      a.recall += v.recall;
      a.ndcg += v.ndcg;
      a.map += v.map;
    }
    pred.insert(pred.end(), m.predicted.begin(), m.predicted.end());
    act.insert(act.end(), m.actual.begin(), m.actual.end());
  }
  if (r.n_users == 0)
    config_error(kEval, "no evaluable users in segment '" + std::string(to_string(segment)) + "'");
  const double n = static_cast<double>(r.n_users);
  for (auto& [k, a] : r.at_k) {
    a.precision /= n;
    a.recall /= n;
    a.ndcg /= n;
    a.map /= n;
  }
  r.mae = mae(pred, act);
  r.rmse = rmse(pred, act);
  return r;
}

/// Scores all items for every user with held-out items and reports each
/// requested segment. With no segments given: `all`, plus `warm` and `cold`
/// when the splits carry a cold-start threshold (an empty warm/cold segment is
/// then reported as a warning instead of an error).
inline EvalReport evaluate_all_ranking(const Matrix& user_emb, const Matrix& item_repr, const SplitBundle& splits,
                                       const EvalConfig& cfg, std::vector<Segment> segments = {}) {
  EvalReport report;
  report.ks = cfg.ks;
  const bool defaulted = segments.empty();
  if (defaulted) {
    segments.push_back(Segment::All);
    if (splits.cold_threshold > 0) {
      segments.push_back(Segment::Warm);
      segments.push_back(Segment::Cold);
    }
  }
  const auto users = per_user_metrics(user_emb, item_repr, splits, cfg, &report.warnings);
  for (Segment s : segments) {
    try {
      report.segments.push_back(aggregate_segment(users, splits, cfg.ks, s));
    } catch (const Error&) {
      if (!defaulted || s == Segment::All) throw;
      report.warnings.push_back("segment '" + std::string(to_string(s)) + "' has no evaluable users");
    }
  }
  if (splits.cold_threshold > 0)
    report.warnings.insert(report.warnings.begin(),
                           "cold users: fewer than " + std::to_string(splits.cold_threshold) +
                               " training interactions (threshold protocol of this library)");
  return report;
}

}  // namespace mmrs
