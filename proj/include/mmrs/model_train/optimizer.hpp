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

#include "mmrs/model_train/params.hpp"

#include <cmath>

namespace mmrs {

/// Dense SGD or Adam over every tensor of ModelParams.
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const ModelParams& like)
      : kind_(cfg.optimizer), lr_(cfg.learning_rate) {
    if (kind_ == OptimizerKind::Adam) {
      m_ = like.zeros_like();
      v_ = like.zeros_like();
    }
  }

  void step(ModelParams& params, ModelParams& grads) {
    auto p = tensors(params);
    auto g = tensors(grads);
    if (kind_ == OptimizerKind::Sgd) {
      for (std::size_t t = 0; t < p.size(); ++t)
        for (std::size_t k = 0; k < p[t].size(); ++k) p[t][k] -= lr_ * g[t][k];
      return;
    }
    ++steps_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
    auto m = tensors(m_);
    auto v = tensors(v_);
    for (std::size_t t = 0; t < p.size(); ++t) {
      for (std::size_t k = 0; k < p[t].size(); ++k) {
        const double gk = g[t][k];
        m[t][k] = kBeta1 * m[t][k] + (1.0 - kBeta1) * gk;
        v[t][k] = kBeta2 * v[t][k] + (1.0 - kBeta2) * gk * gk;
        p[t][k] -= lr_ * (m[t][k] / c1) / (std::sqrt(v[t][k] / c2) + kEps);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  OptimizerKind kind_;
  double lr_;
  std::size_t steps_ = 0;
  ModelParams m_, v_;
};

}  // namespace mmrs
