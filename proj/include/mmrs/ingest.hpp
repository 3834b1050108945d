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

// Interaction data, SIoT event logs, modality feature files and the
// per-user train/validation/test splits.

#pragma once

#include "mmrs/core.hpp"
#include "mmrs/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mmrs {

inline constexpr std::string_view kIngest = "ingest";

/// Bijection between raw identifiers and [0, n). Indices follow the sorted
/// order of the identifiers, so the map depends only on the identifier set.
class IdMap {
 public:
  IdMap() = default;

  static IdMap from_ids(std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    IdMap m;
    m.ids_ = std::move(ids);
    m.lookup_.reserve(m.ids_.size());
    for (std::size_t i = 0; i < m.ids_.size(); ++i) m.lookup_.emplace(m.ids_[i], i);
    return m;
  }

  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t index) const { return ids_.at(index); }
  const std::vector<std::string>& ids() const { return ids_; }

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = lookup_.find(id);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const IdMap& a, const IdMap& b) { return a.ids_ == b.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

struct Interaction {
  std::size_t user = 0;
  std::size_t item = 0;
  double weight = 1.0;
  std::optional<std::int64_t> timestamp;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Implicit feedback. Records are sorted by (user, item) with one record per
/// pair; `weight` is the aggregated occurrence count.
struct InteractionSet {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::vector<Interaction> records;
  IdMap users;
  IdMap items;

  bool empty() const { return records.empty(); }
  std::size_t size() const { return records.size(); }

  /// Same index space, no records.
  InteractionSet empty_like() const {
    InteractionSet s;
    s.n_users = n_users;
    s.n_items = n_items;
    s.users = users;
    s.items = items;
    return s;
  }

  friend bool operator==(const InteractionSet&, const InteractionSet&) = default;
};

/// Per-user sorted item lists (CSR) for membership tests.
class UserItemIndex {
 public:
  UserItemIndex() = default;

  UserItemIndex(std::size_t n_users, std::span<const InteractionSet* const> sets) : offsets_(n_users + 1, 0) {
    for (const auto* s : sets)
      for (const auto& r : s->records) ++offsets_[r.user + 1];
    for (std::size_t u = 0; u < n_users; ++u) offsets_[u + 1] += offsets_[u];
    items_.resize(offsets_.back());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (const auto* s : sets)
      for (const auto& r : s->records) items_[cursor[r.user]++] = r.item;
    for (std::size_t u = 0; u < n_users; ++u) {
      auto first = items_.begin() + static_cast<std::ptrdiff_t>(offsets_[u]);
      auto last = items_.begin() + static_cast<std::ptrdiff_t>(offsets_[u + 1]);
      std::sort(first, last);
    }
  }

  explicit UserItemIndex(const InteractionSet& set) : UserItemIndex(set.n_users, std::span<const InteractionSet* const>(std::array<const InteractionSet*, 1>{&set})) {}

  std::size_t n_users() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }

  std::span<const std::size_t> items(std::size_t user) const {
    return std::span(items_).subspan(offsets_[user], offsets_[user + 1] - offsets_[user]);
  }

  std::size_t count(std::size_t user) const { return offsets_[user + 1] - offsets_[user]; }

  bool contains(std::size_t user, std::size_t item) const {
    auto row = items(user);
    return std::binary_search(row.begin(), row.end(), item);
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> items_;
};

namespace detail {

struct RawInteraction {
  std::string user;
  std::string item;
  double weight = 1.0;
  std::optional<std::int64_t> timestamp;
};

/// Builds index maps, sorts, and merges duplicate (user, item) rows:
/// weights add up and the earliest timestamp is kept.
inline InteractionSet aggregate(const std::vector<RawInteraction>& rows) {
  std::vector<std::string> user_ids, item_ids;
  user_ids.reserve(rows.size());
  item_ids.reserve(rows.size());
  for (const auto& r : rows) {
    user_ids.push_back(r.user);
    item_ids.push_back(r.item);
  }
  InteractionSet set;
  set.users = IdMap::from_ids(std::move(user_ids));
  set.items = IdMap::from_ids(std::move(item_ids));
  set.n_users = set.users.size();
  set.n_items = set.items.size();

  std::vector<Interaction> recs;
  recs.reserve(rows.size());
  for (const auto& r : rows)
    recs.push_back({*set.users.find(r.user), *set.items.find(r.item), r.weight, r.timestamp});
  std::stable_sort(recs.begin(), recs.end(), [](const Interaction& a, const Interaction& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
  for (const auto& r : recs) {
    if (!set.records.empty() && set.records.back().user == r.user && set.records.back().item == r.item) {
      auto& last = set.records.back();
      last.weight += r.weight;
      if (r.timestamp && (!last.timestamp || *r.timestamp < *last.timestamp)) last.timestamp = r.timestamp;
    } else {
      set.records.push_back(r);
    }
  }
  return set;
}

inline std::string at_line(const std::string& path, std::size_t line) {
  return "'" + path + "' line " + std::to_string(line);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SIoT objects and object-service events

enum class EventKind { Usage, Generation };

struct SIoTObject {
  std::string object_id;
  std::set<std::string> services;
  std::set<std::string> owners;
};

/// Typed edge of the SIoT relationship graph. Stored for reference only; the
/// recommender does not read it.
struct SIoTRelation {
  std::string from;
  std::string to;
  std::string kind;
};

struct ObjectServiceEvent {
  std::string object_id;
  std::string service_id;
  std::string user_id;
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;
  EventKind kind = EventKind::Usage;
};

/// Registry implied by the events themselves: every object declares the
/// services and owners it appears with.
inline std::vector<SIoTObject> objects_from_events(std::span<const ObjectServiceEvent> events) {
  std::map<std::string, SIoTObject> by_id;
  for (const auto& e : events) {
    auto& obj = by_id[e.object_id];
    obj.object_id = e.object_id;
    obj.services.insert(e.service_id);
    obj.owners.insert(e.user_id);
  }
  std::vector<SIoTObject> out;
  for (auto& [id, obj] : by_id) out.push_back(std::move(obj));
  return out;
}

/// Maps usage and generation events onto (user, service) implicit feedback.
/// Both kinds count; weight is the event count and the timestamp is the
/// earliest t_start.
inline InteractionSet events_to_interactions(std::span<const ObjectServiceEvent> events,
                                             std::span<const SIoTObject> registry) {
  std::unordered_map<std::string, const SIoTObject*> objects;
  for (const auto& o : registry) objects.emplace(o.object_id, &o);

  std::vector<detail::RawInteraction> rows;
  rows.reserve(events.size());
  for (std::size_t n = 0; n < events.size(); ++n) {
    const auto& e = events[n];
    const std::string where = "event " + std::to_string(n);
    if (e.t_start > e.t_end) input_error(kIngest, where + ": t_start > t_end");
    auto it = objects.find(e.object_id);
    if (it == objects.end()) input_error(kIngest, where + ": unknown object '" + e.object_id + "'");
    if (!it->second->services.contains(e.service_id))
      input_error(kIngest, where + ": unknown service '" + e.service_id + "' for object '" + e.object_id + "'");
    if (!it->second->owners.contains(e.user_id))
      input_error(kIngest, where + ": unknown user '" + e.user_id + "' for object '" + e.object_id + "'");
    rows.push_back({e.user_id, e.service_id, 1.0, e.t_start});
  }
  if (rows.empty()) return {};
  return detail::aggregate(rows);
}

inline InteractionSet events_to_interactions(std::span<const ObjectServiceEvent> events) {
  const auto registry = objects_from_events(events);
  return events_to_interactions(events, registry);
}

/// Event log CSV: `object,service,user,t_start,t_end,kind`.
inline std::vector<ObjectServiceEvent> load_events(const std::string& path) {
  const std::string text = io::read_file(path, kIngest);
  const auto lines = io::lines(text);
  std::size_t ln = 0;
  while (ln < lines.size() && io::trim(lines[ln]).empty()) ++ln;
  if (ln == lines.size()) input_error(kIngest, "'" + path + "': empty dataset");
  const auto header = io::split_csv(lines[ln]);
  const std::vector<std::string> expected{"object", "service", "user", "t_start", "t_end", "kind"};
  if (!header || *header != expected)
    input_error(kIngest, detail::at_line(path, ln + 1) + ": expected header object,service,user,t_start,t_end,kind");

  std::vector<ObjectServiceEvent> events;
  for (++ln; ln < lines.size(); ++ln) {
    if (io::trim(lines[ln]).empty()) continue;
    const auto where = detail::at_line(path, ln + 1);
    const auto f = io::split_csv(lines[ln]);
    if (!f || f->size() != 6) input_error(kIngest, where + ": malformed row");
    for (int c = 0; c < 3; ++c) {
      if (!io::valid_utf8((*f)[c])) input_error(kIngest, where + ": non-UTF8 identifier");
      if ((*f)[c].empty()) input_error(kIngest, where + ": malformed row (empty identifier)");
    }
    const auto ts = io::parse_number<std::int64_t>((*f)[3]);
    const auto te = io::parse_number<std::int64_t>((*f)[4]);
    if (!ts || !te) input_error(kIngest, where + ": malformed timestamp");
    ObjectServiceEvent e{(*f)[0], (*f)[1], (*f)[2], *ts, *te, EventKind::Usage};
    if ((*f)[5] == "usage")
      e.kind = EventKind::Usage;
    else if ((*f)[5] == "generation")
      e.kind = EventKind::Generation;
    else
      input_error(kIngest, where + ": kind must be usage or generation");
    if (e.t_start > e.t_end) input_error(kIngest, where + ": t_start > t_end");
    events.push_back(std::move(e));
  }
  if (events.empty()) input_error(kIngest, "'" + path + "': empty dataset");
  return events;
}

/// Relationship CSV: `object_a,object_b,kind`.
inline std::vector<SIoTRelation> load_relations(const std::string& path) {
  const std::string text = io::read_file(path, kIngest);
  const auto lines = io::lines(text);
  std::vector<SIoTRelation> out;
  bool header_seen = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (io::trim(lines[ln]).empty()) continue;
    const auto f = io::split_csv(lines[ln]);
    if (!f || f->size() != 3) input_error(kIngest, detail::at_line(path, ln + 1) + ": malformed row");
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    out.push_back({(*f)[0], (*f)[1], (*f)[2]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interaction files

enum class InteractionFormat { Csv, EventLog };

/// Interaction CSV: header `user,item[,timestamp[,weight]]`. The optional
/// weight column is what `write_interactions` emits so that aggregated sets
/// survive a round trip; rows without it count once.
inline InteractionSet load_interactions(const std::string& path, InteractionFormat format = InteractionFormat::Csv) {
  if (format == InteractionFormat::EventLog) {
    const auto events = load_events(path);
    return events_to_interactions(events);
  }
  const std::string text = io::read_file(path, kIngest);
  const auto lines = io::lines(text);
  std::size_t ln = 0;
  while (ln < lines.size() && io::trim(lines[ln]).empty()) ++ln;
  if (ln == lines.size()) input_error(kIngest, "'" + path + "': empty dataset");

  const auto header = io::split_csv(lines[ln]);
  if (!header || header->size() < 2 || (*header)[0] != "user" || (*header)[1] != "item")
    input_error(kIngest, detail::at_line(path, ln + 1) + ": expected header user,item[,timestamp[,weight]]");
  int ts_col = -1, w_col = -1;
  for (std::size_t c = 2; c < header->size(); ++c) {
    if ((*header)[c] == "timestamp" && ts_col < 0)
      ts_col = static_cast<int>(c);
    else if ((*header)[c] == "weight" && w_col < 0)
      w_col = static_cast<int>(c);
    else
      input_error(kIngest, detail::at_line(path, ln + 1) + ": unknown column '" + (*header)[c] + "'");
  }
  const std::size_t n_cols = header->size();

  std::vector<detail::RawInteraction> rows;
  for (++ln; ln < lines.size(); ++ln) {
    if (io::trim(lines[ln]).empty()) continue;
    const auto where = detail::at_line(path, ln + 1);
    auto f = io::split_csv(lines[ln]);
    if (!f) input_error(kIngest, where + ": malformed row (unterminated quote)");
    // A trailing optional timestamp may be left off entirely.
    if (f->size() + 1 == n_cols && ts_col == static_cast<int>(n_cols) - 1) f->emplace_back();
    if (f->size() != n_cols) input_error(kIngest, where + ": malformed row (expected " + std::to_string(n_cols) + " fields)");
    detail::RawInteraction r;
    r.user = (*f)[0];
    r.item = (*f)[1];
    if (!io::valid_utf8(r.user) || !io::valid_utf8(r.item)) input_error(kIngest, where + ": non-UTF8 identifier");
    if (r.user.empty() || r.item.empty()) input_error(kIngest, where + ": malformed row (empty identifier)");
    if (ts_col >= 0 && !(*f)[ts_col].empty()) {
      r.timestamp = io::parse_number<std::int64_t>((*f)[ts_col]);
      if (!r.timestamp) input_error(kIngest, where + ": malformed timestamp");
    }
    if (w_col >= 0) {
      const auto w = io::parse_number<double>((*f)[w_col]);
      if (!w || !std::isfinite(*w) || *w <= 0.0) input_error(kIngest, where + ": weight must be a positive number");
      r.weight = *w;
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) input_error(kIngest, "'" + path + "': empty dataset");
  return detail::aggregate(rows);
}

/// Canonical form: `user,item,timestamp,weight`, one row per record.
inline std::string format_interactions(const InteractionSet& set) {
  std::string out = "user,item,timestamp,weight\n";
  for (const auto& r : set.records) {
    out += io::quote_csv(set.users.id(r.user));
    out += ',';
    out += io::quote_csv(set.items.id(r.item));
    out += ',';
    if (r.timestamp) out += std::to_string(*r.timestamp);
    out += ',';
    out += io::format_double(r.weight);
    out += '\n';
  }
  return out;
}

inline void write_interactions(const InteractionSet& set, const std::string& path) {
  io::write_file(path, format_interactions(set), kIngest);
}

/// `index,id` rows, one per identifier.
inline void write_index_map(const IdMap& map, const std::string& path) {
  std::string out = "index,id\n";
  for (std::size_t i = 0; i < map.size(); ++i) out += std::to_string(i) + "," + io::quote_csv(map.id(i)) + "\n";
  io::write_file(path, out, kIngest);
}

// ---------------------------------------------------------------------------
// Modality features

struct ModalityFeatures {
  std::string modality_id;
  Matrix values;                 // row i = feature vector of item i
  std::size_t missing_rows = 0;  // rows zero-filled at load time

  std::size_t n_items() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
};

struct FeatureLoadOptions {
  /// Largest number of indexed items a file may omit (zero-filled).
  std::size_t max_missing = std::numeric_limits<std::size_t>::max();
};

inline constexpr std::string_view kFeatureMagic = "MMFV1";

namespace detail {

inline void check_missing(const std::string& path, std::size_t missing, const FeatureLoadOptions& opts) {
  if (missing > opts.max_missing)
    input_error(kIngest, "'" + path + "': item count mismatch (" + std::to_string(missing) +
                             " items missing, allowance " + std::to_string(opts.max_missing) + ")");
}

inline void check_row_finite(const std::string& path, const Matrix& m, std::size_t row) {
  if (!m.row(static_cast<Eigen::Index>(row)).allFinite())
    input_error(kIngest, "'" + path + "': non-finite value in row " + std::to_string(row));
}

}  // namespace detail

/// Reads a feature matrix, binary (`MMFV1`) or CSV (`n_items,dim` header).
///
/// Binary and positional CSV rows are taken in item-index order; a file with
/// fewer rows than `items` leaves the trailing items zero-filled. CSV rows may
/// instead start with an item identifier (dim + 1 fields), in which case any
/// indexed item not listed is zero-filled. The zero-filled count is returned
/// in `missing_rows`.
inline ModalityFeatures load_modality_features(const std::string& path, const std::string& modality_id,
                                               const IdMap* items = nullptr, FeatureLoadOptions opts = {}) {
  const std::string data = io::read_file(path, kIngest);
  ModalityFeatures out;
  out.modality_id = modality_id;

  if (std::string_view(data).substr(0, kFeatureMagic.size()) == kFeatureMagic) {
    io::ByteReader in(data, kIngest, "feature file '" + path + "'");
    in.bytes(kFeatureMagic.size());
    const std::uint64_t n = in.u64();
    const std::uint64_t dim = in.u64();
    if (dim == 0) input_error(kIngest, "'" + path + "': dimension must be positive");
    if (in.remaining() / 4 / dim < n || in.remaining() != n * dim * 4)
      input_error(kIngest, "'" + path + "': body length does not match header (" + std::to_string(n) + " x " +
                               std::to_string(dim) + ")");
    std::size_t rows = n;
    if (items) {
      if (n > items->size())
        input_error(kIngest, "'" + path + "': item count mismatch (" + std::to_string(n) + " rows for " +
                                 std::to_string(items->size()) + " items)");
      rows = items->size();
    }
    out.values = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < dim; ++d)
        out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = in.f32();
      detail::check_row_finite(path, out.values, i);
    }
    out.missing_rows = rows - n;
    detail::check_missing(path, out.missing_rows, opts);
    return out;
  }

  const auto lines = io::lines(data);
  std::size_t ln = 0;
  while (ln < lines.size() && io::trim(lines[ln]).empty()) ++ln;
  if (ln == lines.size()) input_error(kIngest, "'" + path + "': empty feature file");
  const auto header = io::split_csv(lines[ln]);
  std::optional<std::size_t> n, dim;
  if (header && header->size() == 2) {
    n = io::parse_number<std::size_t>((*header)[0]);
    dim = io::parse_number<std::size_t>((*header)[1]);
  }
  if (!n || !dim) input_error(kIngest, detail::at_line(path, ln + 1) + ": expected header n_items,dim");
  if (*dim == 0) input_error(kIngest, "'" + path + "': dimension must be positive");

  std::vector<std::vector<std::string>> body;
  std::vector<std::size_t> body_line;
  for (++ln; ln < lines.size(); ++ln) {
    if (io::trim(lines[ln]).empty()) continue;
    auto f = io::split_csv(lines[ln]);
    if (!f) input_error(kIngest, detail::at_line(path, ln + 1) + ": malformed row");
    body.push_back(std::move(*f));
    body_line.push_back(ln + 1);
  }
  if (body.size() != *n)
    input_error(kIngest, "'" + path + "': body length " + std::to_string(body.size()) + " does not match header n_items " +
                             std::to_string(*n));
  const bool keyed = !body.empty() && body.front().size() == *dim + 1;
  std::size_t rows = *n;
  if (items) {
    if (*n > items->size())
      input_error(kIngest, "'" + path + "': item count mismatch (" + std::to_string(*n) + " rows for " +
                               std::to_string(items->size()) + " items)");
    rows = items->size();
  } else if (keyed) {
    input_error(kIngest, "'" + path + "': item-keyed rows need an item index map");
  }
  out.values = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(*dim));
  std::vector<bool> filled(rows, false);
  for (std::size_t r = 0; r < body.size(); ++r) {
    const auto& f = body[r];
    const auto where = detail::at_line(path, body_line[r]);
    if (f.size() != *dim + (keyed ? 1 : 0))
      input_error(kIngest, where + ": dimension mismatch (" + std::to_string(f.size() - (keyed ? 1 : 0)) +
                               " values, expected " + std::to_string(*dim) + ")");
    std::size_t row = r;
    if (keyed) {
      const auto idx = items->find(f[0]);
      if (!idx) input_error(kIngest, where + ": unknown item '" + f[0] + "'");
      row = *idx;
      if (filled[row]) input_error(kIngest, where + ": duplicate item '" + f[0] + "'");
    }
    for (std::size_t d = 0; d < *dim; ++d) {
      const auto v = io::parse_number<double>(f[d + (keyed ? 1 : 0)]);
      if (!v) input_error(kIngest, where + ": malformed number");
      out.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d)) = *v;
    }
    detail::check_row_finite(path, out.values, row);
    filled[row] = true;
  }
  out.missing_rows = static_cast<std::size_t>(std::count(filled.begin(), filled.end(), false));
  detail::check_missing(path, out.missing_rows, opts);
  return out;
}

/// Binary `MMFV1` writer (values narrowed to f32).
inline void write_modality_features(const ModalityFeatures& features, const std::string& path) {
  io::ByteWriter w;
  w.bytes(kFeatureMagic);
  w.u64(features.n_items());
  w.u64(features.dim());
  for (Eigen::Index i = 0; i < features.values.rows(); ++i)
    for (Eigen::Index d = 0; d < features.values.cols(); ++d) w.f32(static_cast<float>(features.values(i, d)));
  io::write_file(path, w.data(), kIngest);
}

// ---------------------------------------------------------------------------
// Splits

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct SplitBundle {
  InteractionSet train;
  InteractionSet validation;
  InteractionSet test;
  std::uint64_t seed = 0;
  std::size_t cold_threshold = 0;           // 0 when no cold-start flagging was requested
  std::vector<std::size_t> cold_user_ids;   // sorted
  std::vector<std::size_t> cold_item_ids;   // sorted

  bool is_cold_user(std::size_t user) const {
    return std::binary_search(cold_user_ids.begin(), cold_user_ids.end(), user);
  }

  friend bool operator==(const SplitBundle&, const SplitBundle&) = default;
};

/// Per-user shuffled partition. Validation and test receive round(n * ratio)
/// records; train takes the remainder and always keeps at least one record
/// (test gives way first, then validation).
inline SplitBundle split_dataset(const InteractionSet& interactions, SplitRatios ratios, std::uint64_t seed) {
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (!(ratios.train >= 0 && ratios.validation >= 0 && ratios.test >= 0) || std::abs(sum - 1.0) > 1e-9)
    config_error(kIngest, "split ratios must be non-negative and sum to 1");

  SplitBundle b;
  b.seed = seed;
  b.train = interactions.empty_like();
  b.validation = interactions.empty_like();
  b.test = interactions.empty_like();

  std::mt19937_64 rng(seed);
  std::vector<Interaction> user_recs;
  std::size_t pos = 0;
  const auto& recs = interactions.records;
  for (std::size_t u = 0; u < interactions.n_users; ++u) {
    user_recs.clear();
    while (pos < recs.size() && recs[pos].user == u) user_recs.push_back(recs[pos++]);
    if (user_recs.empty())
      input_error(kIngest, "user '" + (u < interactions.users.size() ? interactions.users.id(u) : std::to_string(u)) +
                               "' has zero records");
    std::shuffle(user_recs.begin(), user_recs.end(), rng);
    const std::size_t n = user_recs.size();
    auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.validation));
    auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.test));
    while (n_val + n_test > n - 1) {
      if (n_test > 0)
        --n_test;
      else
        --n_val;
    }
    const std::size_t n_train = n - n_val - n_test;
    for (std::size_t k = 0; k < n; ++k) {
      auto& dst = k < n_train ? b.train : (k < n_train + n_val ? b.validation : b.test);
      dst.records.push_back(user_recs[k]);
    }
  }
  if (pos != recs.size()) input_error(kIngest, "records reference users outside [0, n_users)");
  for (auto* part : {&b.train, &b.validation, &b.test})
    std::sort(part->records.begin(), part->records.end(), [](const Interaction& x, const Interaction& y) {
      return x.user != y.user ? x.user < y.user : x.item < y.item;
    });
  return b;
}

/// split_dataset, then flags users (and items) with fewer than
/// `min_train_count` training records as cold.
inline SplitBundle cold_start_split(const InteractionSet& interactions, std::size_t min_train_count, std::uint64_t seed,
                                    SplitRatios ratios = {}) {
  if (min_train_count < 1) config_error(kIngest, "min_train_count must be >= 1");
  SplitBundle b = split_dataset(interactions, ratios, seed);
  b.cold_threshold = min_train_count;
  std::vector<std::size_t> user_count(interactions.n_users, 0), item_count(interactions.n_items, 0);
  for (const auto& r : b.train.records) {
    ++user_count[r.user];
    ++item_count[r.item];
  }
  for (std::size_t u = 0; u < user_count.size(); ++u)
    if (user_count[u] < min_train_count) b.cold_user_ids.push_back(u);
  for (std::size_t i = 0; i < item_count.size(); ++i)
    if (item_count[i] < min_train_count) b.cold_item_ids.push_back(i);
  return b;
}

}  // namespace mmrs
