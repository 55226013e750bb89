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

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mcdrop/datasets.hpp"
#include "mcdrop/errors.hpp"
#include "mcdrop/loss.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop {

struct LrDrop {
  std::size_t iteration = 0;
  double factor = 0.1;
  bool operator==(const LrDrop&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.05;
  double weight_decay = 1e-4;
  std::size_t batch_size = 32;
  std::size_t iterations = 2000;
  std::vector<LrDrop> lr_drops;
  double dropout_rate = 0.5;
  std::uint64_t base_seed = 0;
  LossKind loss = LossKind::CrossEntropy;
  AugmentOps augment;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw ConfigError("dropout_rate must lie in [0,1)");
    }
    for (const auto& d : lr_drops) {
      if (!(d.factor > 0.0)) throw ConfigError("lr_drop factor must be positive");
    }
  }
};

// Learning rate in effect at `iteration`: every drop whose iteration has been
// reached multiplies the base rate by its factor.
inline double learning_rate_at(const TrainConfig& cfg, std::size_t iteration) {
  double lr = cfg.learning_rate;
  for (const auto& d : cfg.lr_drops) {
    if (iteration >= d.iteration) lr *= d.factor;
  }
  return lr;
}

// Glorot-uniform weights, zero biases.
inline void initialize_weights(SplitNetwork& net, std::uint64_t seed) {
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const auto& spec = net.layer(i);
    if (!spec.has_weights()) continue;
    const std::size_t receptive = spec.kind == LayerKind::Conv ? spec.kernel_h * spec.kernel_w : 1;
    const double fan_in = static_cast<double>(spec.in * receptive);
    const double fan_out = static_cast<double>(spec.out * receptive);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    CounterStream rng(seed, Stream::Init, static_cast<std::uint32_t>(i));
    auto& p = net.params(i);
    for (auto& w : p.weight.data()) w = rng.uniform(-limit, limit);
    for (auto& b : p.bias.data()) b = 0.0;
  }
}

// w <- w - lr * (g + lambda * w) for weights; biases get no decay.
inline void sgd_step(std::vector<LayerParams>& weights, const std::vector<LayerParams>& grads,
                     double learning_rate, double weight_decay) {
  if (weights.size() != grads.size()) {
    throw DimensionError("sgd_step: " + std::to_string(weights.size()) + " layers vs " +
                         std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    auto& p = weights[i];
    const auto& g = grads[i];
    require_same_shape(p.weight, g.weight, "sgd_step weight");
    require_same_shape(p.bias, g.bias, "sgd_step bias");
    for (std::size_t j = 0; j < p.weight.size(); ++j) {
      p.weight[j] -= learning_rate * (g.weight[j] + weight_decay * p.weight[j]);
    }
    for (std::size_t j = 0; j < p.bias.size(); ++j) p.bias[j] -= learning_rate * g.bias[j];
  }
}

inline void sgd_step(std::vector<LayerParams>& weights, const std::vector<LayerParams>& grads,
                     const TrainConfig& cfg) {
  sgd_step(weights, grads, cfg.learning_rate, cfg.weight_decay);
}

// Mean loss of deterministic forward passes over the whole dataset.
inline double dataset_loss(const SplitNetwork& net, const Dataset& data, LossKind loss) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total += network_loss(net, loss, data.label(i), forward_deterministic(net, data.inputs[i]));
  }
  return total / static_cast<double>(data.size());
}

struct TrainResult {
  SplitNetwork net;
  // Mean mini-batch loss of every iteration, measured before its update.
  std::vector<double> loss_curve;
};

// Mini-batch SGD. Batch i of iteration `it` is drawn with replacement from the
// (base_seed, it) batch stream; sample j of the batch uses dropout pass
// it * batch_size + j of the training-dropout stream.
inline TrainResult train(SplitNetwork net, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  validate_split(net);
  if (data.size() == 0) throw ConfigError("train: dataset is empty");
  if (data.labels.dim(0) != data.size()) {
    throw DimensionError("train: " + std::to_string(data.size()) + " inputs but " +
                         std::to_string(data.labels.dim(0)) + " label rows");
  }
  // Rejects loss/head pairings before the first step.
  network_loss(net, cfg.loss, Tensor(net.output_shape()), Tensor(net.output_shape(), 0.5));

  const bool augmenting = cfg.augment.noise_sigma > 0.0 || cfg.augment.max_translation > 0.0;
  TrainResult result;
  result.loss_curve.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const double lr = learning_rate_at(cfg, it);
    CounterStream batch(cfg.base_seed, Stream::TrainBatch, static_cast<std::uint32_t>(it));
    std::vector<LayerParams> sum;
    double loss_sum = 0.0;
    for (std::size_t j = 0; j < cfg.batch_size; ++j) {
      const std::size_t idx = batch.index(data.size());
      const auto pass = static_cast<std::uint32_t>(it * cfg.batch_size + j);
      Tensor x = augmenting ? augment(data.inputs[idx], cfg.augment, mix_seed(cfg.base_seed, pass))
                            : data.inputs[idx];
      Gradients g;
      if (cfg.dropout_rate > 0.0) {
        const auto mask = make_dropout_mask(net, 1.0 - cfg.dropout_rate, cfg.base_seed, pass,
                                            Stream::TrainDropout);
        g = backward(net, x, data.label(idx), cfg.loss, &mask);
      } else {
        g = backward(net, x, data.label(idx), cfg.loss);
      }
      loss_sum += g.loss;
      if (sum.empty()) {
        sum = std::move(g.params);
        continue;
      }
      for (std::size_t l = 0; l < sum.size(); ++l) {
        for (std::size_t k = 0; k < sum[l].weight.size(); ++k) sum[l].weight[k] += g.params[l].weight[k];
        for (std::size_t k = 0; k < sum[l].bias.size(); ++k) sum[l].bias[k] += g.params[l].bias[k];
      }
    }
    const double mean_loss = loss_sum / static_cast<double>(cfg.batch_size);
    if (!std::isfinite(mean_loss)) {
      std::ostringstream msg;
      msg << "training diverged at iteration " << it << " (learning rate " << lr
          << ", mean batch loss " << mean_loss << ")";
      throw DivergenceError(msg.str());
    }
    result.loss_curve.push_back(mean_loss);
    const double inv = 1.0 / static_cast<double>(cfg.batch_size);
    for (auto& p : sum) {
      for (auto& v : p.weight.data()) v *= inv;
      for (auto& v : p.bias.data()) v *= inv;
    }
    sgd_step(net.parameters(), sum, lr, cfg.weight_decay);
  }
  result.net = std::move(net);
  return result;
}

inline void write_loss_csv(std::ostream& out, const std::vector<double>& curve) {
  out << "iteration,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, curve[i]);
    out << buf;
  }
}

}  // namespace mcdrop
