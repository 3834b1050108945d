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

// Checkpoint file, little-endian throughout:
//
//   "MMCK1"  u32 version  u32 scalar_bytes (8)
//   u64 n_users  u64 n_items  u64 dim  u64 n_transforms  u64 n_logits
//   per transform: u64 out_dim  u64 in_dim
//   user_emb, item_emb, per transform (weight, bias), logits   (row-major f64)
//   str config  str rng_state  u64 seed  u64 n_modalities  str modality_id...
//   u64 FNV-1a checksum of all preceding bytes
//
// (str = u64 length + bytes)

#pragma once

#include "mmrs/io.hpp"
#include "mmrs/model_train/params.hpp"

#include <string>
#include <vector>

namespace mmrs {

inline constexpr std::string_view kCheckpointMagic = "MMCK1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  std::string config;  // canonical experiment config the model was trained with
  std::uint64_t seed = 0;
  std::string rng_state;
  std::vector<std::string> modality_ids;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

inline void put_doubles(io::ByteWriter& w, const double* data, Eigen::Index n) {
  for (Eigen::Index k = 0; k < n; ++k) w.f64(data[k]);
}

inline void get_doubles(io::ByteReader& r, double* data, Eigen::Index n) {
  for (Eigen::Index k = 0; k < n; ++k) data[k] = r.f64();
}

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
  const auto& p = ck.params;
  io::ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(sizeof(double));
  w.u64(p.n_users());
  w.u64(p.n_items());
  w.u64(p.dim());
  w.u64(p.transforms.size());
  w.u64(static_cast<std::uint64_t>(p.modality_logits.size()));
  for (const auto& t : p.transforms) {
    w.u64(t.out_dim());
    w.u64(t.in_dim());
  }
  detail::put_doubles(w, p.user_emb.data(), p.user_emb.size());
  detail::put_doubles(w, p.item_emb.data(), p.item_emb.size());
  for (const auto& t : p.transforms) {
    detail::put_doubles(w, t.weight.data(), t.weight.size());
    detail::put_doubles(w, t.bias.data(), t.bias.size());
  }
  detail::put_doubles(w, p.modality_logits.data(), p.modality_logits.size());
  w.str(ck.config);
  w.str(ck.rng_state);
  w.u64(ck.seed);
  w.u64(ck.modality_ids.size());
  for (const auto& id : ck.modality_ids) w.str(id);
  w.u64(fnv1a64(w.data()));
  return w.data();
}

inline Checkpoint decode_checkpoint(std::string_view bytes, const std::string& what = "checkpoint") {
  io::ByteReader r(bytes, kModelTrain, what);
  if (r.remaining() < kCheckpointMagic.size() || r.bytes(kCheckpointMagic.size()) != kCheckpointMagic)
    input_error(kModelTrain, what + ": not a checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    input_error(kModelTrain, what + ": unsupported checkpoint version " + std::to_string(version));
  if (r.u32() != sizeof(double)) input_error(kModelTrain, what + ": unsupported scalar width");
  if (bytes.size() < 8 || fnv1a64(bytes.substr(0, bytes.size() - 8)) !=
                              io::ByteReader(bytes.substr(bytes.size() - 8), kModelTrain, what).u64())
    input_error(kModelTrain, what + " is truncated or corrupt (checksum mismatch)");

  const auto n_users = r.u64(), n_items = r.u64(), dim = r.u64(), n_trans = r.u64(), n_logits = r.u64();
  const auto limit = bytes.size() / 8;
  if (n_users * dim > limit || n_items * dim > limit || n_trans > limit || n_logits > limit)
    input_error(kModelTrain, what + " is truncated or corrupt (implausible shape)");
  Checkpoint ck;
  auto& p = ck.params;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes;
  for (std::uint64_t t = 0; t < n_trans; ++t) {
    const auto out = r.u64(), in = r.u64();
    if (out * in > limit) input_error(kModelTrain, what + " is truncated or corrupt (implausible shape)");
    shapes.emplace_back(out, in);
  }
  p.user_emb.resize(static_cast<Eigen::Index>(n_users), static_cast<Eigen::Index>(dim));
  p.item_emb.resize(static_cast<Eigen::Index>(n_items), static_cast<Eigen::Index>(dim));
  detail::get_doubles(r, p.user_emb.data(), p.user_emb.size());
  detail::get_doubles(r, p.item_emb.data(), p.item_emb.size());
  for (const auto& [out, in] : shapes) {
    ModalityTransform t{Matrix(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
                        Vector(static_cast<Eigen::Index>(out))};
    detail::get_doubles(r, t.weight.data(), t.weight.size());
    detail::get_doubles(r, t.bias.data(), t.bias.size());
    p.transforms.push_back(std::move(t));
  }
  p.modality_logits.resize(static_cast<Eigen::Index>(n_logits));
  detail::get_doubles(r, p.modality_logits.data(), p.modality_logits.size());
  ck.config = r.str();
  ck.rng_state = r.str();
  ck.seed = r.u64();
  const auto n_ids = r.u64();
  if (n_ids > limit) input_error(kModelTrain, what + " is truncated or corrupt");
  for (std::uint64_t k = 0; k < n_ids; ++k) ck.modality_ids.push_back(r.str());
  if (r.remaining() != 8) input_error(kModelTrain, what + " is truncated or corrupt (trailing bytes)");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  io::write_file(path, encode_checkpoint(ck), kModelTrain);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  const std::string bytes = io::read_file(path, kModelTrain);
  return decode_checkpoint(bytes, "checkpoint '" + path + "'");
}

/// Throws unless `loaded` has exactly the tensor shapes of `expected`.
inline void check_checkpoint_shape(const ModelParams& loaded, const ModelParams& expected) {
  const auto describe = [](const ModelParams& p) {
    std::string s = std::to_string(p.n_users()) + " users x " + std::to_string(p.n_items()) + " items, d=" +
                    std::to_string(p.dim());
    for (const auto& t : p.transforms) s += ", transform " + std::to_string(t.out_dim()) + "x" + std::to_string(t.in_dim());
    return s + ", " + std::to_string(p.modality_logits.size()) + " logits";
  };
  bool ok = loaded.user_emb.rows() == expected.user_emb.rows() && loaded.user_emb.cols() == expected.user_emb.cols() &&
            loaded.item_emb.rows() == expected.item_emb.rows() && loaded.item_emb.cols() == expected.item_emb.cols() &&
            loaded.transforms.size() == expected.transforms.size() &&
            loaded.modality_logits.size() == expected.modality_logits.size();
  for (std::size_t t = 0; ok && t < loaded.transforms.size(); ++t)
    ok = loaded.transforms[t].out_dim() == expected.transforms[t].out_dim() &&
         loaded.transforms[t].in_dim() == expected.transforms[t].in_dim();
  if (!ok)
    config_error(kModelTrain, "checkpoint shape mismatch: file has " + describe(loaded) + "; model expects " +
                                  describe(expected));
}

}  // namespace mmrs
