/*
 * Copyright 2026 The mcdrop Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "mcdrop/errors.hpp"
#include "mcdrop/tensor.hpp"

namespace mcdrop {

enum class LossKind { CrossEntropy, Euclidean };

inline std::string loss_name(LossKind kind) {
  return kind == LossKind::CrossEntropy ? "cross_entropy" : "euclidean";
}

inline LossKind parse_loss(const std::string& name) {
  if (name == "cross_entropy") return LossKind::CrossEntropy;
  if (name == "euclidean") return LossKind::Euclidean;
  throw ConfigError("unknown loss '" + name + "' (expected cross_entropy or euclidean)");
}

// Predictions are clipped to [eps, 1 - eps] before taking logarithms.
inline constexpr double kProbEpsilon = 1e-12;

// ||y - yhat||^2 / 2
inline double loss_euclidean(const Tensor& y, const Tensor& yhat) {
  require_same_shape(y, yhat, "loss_euclidean");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    acc += d * d;
  }
  return acc / 2.0;
}

namespace detail {

inline void require_binary_labels(const Tensor& y, const char* op) {
  for (double v : y.data()) {
    if (v != 0.0 && v != 1.0) {
      throw LabelError(std::string(op) + ": label value " + std::to_string(v) +
                       " is not in {0,1}");
    }
  }
}

inline double clip_prob(double p) {
  return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

}  // namespace detail

// Binary cross entropy summed over outputs, for sigmoid heads. An output that
// equals its label exactly contributes exactly zero.
inline double loss_cross_entropy(const Tensor& y, const Tensor& yhat) {
  require_same_shape(y, yhat, "loss_cross_entropy");
  detail::require_binary_labels(y, "loss_cross_entropy");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (yhat[i] == y[i]) continue;
    const double p = detail::clip_prob(yhat[i]);
    acc -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return acc;
}

// -sum y log yhat, the cross entropy used with softmax heads.
inline double loss_categorical_cross_entropy(const Tensor& y, const Tensor& yhat) {
  require_same_shape(y, yhat, "loss_categorical_cross_entropy");
  detail::require_binary_labels(y, "loss_categorical_cross_entropy");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0 || yhat[i] == 1.0) continue;
    acc -= std::log(detail::clip_prob(yhat[i]));
  }
  return acc;
}

}  // namespace mcdrop
