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

// Monte-Carlo dropout at test time.
//
// T stochastic head passes over cached features are reduced to a per-class
// predictive mean and variance. A normal confidence interval around the mean
// (half-width z * sigma / sqrt(T)) gives the optimistic score (upper bound)
// and the pessimistic score (lower bound).
//
// The mean is the plain empirical mean. The model precision tau only enters
// as an optional variance offset 1/tau; a literal mode that also adds 1/tau
// to the mean exists for fidelity experiments and is off by default.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcdrop/errors.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/parallel.hpp"
#include "mcdrop/tensor.hpp"

namespace mcdrop {

// Inverse standard normal CDF, Wichura's algorithm AS 241 (PPND16). Relative
// accuracy is about 1e-16 over the whole open interval.
inline double normal_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw ArgumentError("normal_quantile: q = " + std::to_string(q) + " outside (0,1)");
  }
  const double dq = q - 0.5;
  if (std::fabs(dq) <= 0.425) {
    const double r = 0.180625 - dq * dq;
    return dq *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = std::sqrt(-std::log(dq < 0.0 ? q : 1.0 - q));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return dq < 0.0 ? -value : value;
}

// Two-sided confidence level: z is the (1 - alpha/2) normal quantile.
struct ConfidenceConfig {
  double alpha = 0.01;
  double z = 2.5758293035489004;

  static ConfidenceConfig from_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw ArgumentError("alpha = " + std::to_string(alpha) + " outside (0,1)");
    }
    return {alpha, normal_quantile(1.0 - alpha / 2.0)};
  }
};

enum class BehaviorMode { Plain, Mean, Optimistic, Pessimistic };

inline std::string mode_name(BehaviorMode mode) {
  switch (mode) {
    case BehaviorMode::Plain: return "plain";
    case BehaviorMode::Mean: return "mean";
    case BehaviorMode::Optimistic: return "optimistic";
    case BehaviorMode::Pessimistic: return "pessimistic";
  }
  return "unknown";
}

inline BehaviorMode parse_mode(const std::string& name) {
  for (auto m : {BehaviorMode::Plain, BehaviorMode::Mean, BehaviorMode::Optimistic,
                 BehaviorMode::Pessimistic}) {
    if (mode_name(m) == name) return m;
  }
  throw ConfigError("unknown mode '" + name +
                    "' (expected plain, mean, optimistic or pessimistic)");
}

struct PrecisionParams {
  double keep_prob = 0.5;
  double length_scale_sq = 0.005;
  double sample_count = 1.0;
  double weight_decay = 1e-4;
};

// tau = p * l^2 / (2 N lambda)
inline double model_precision(const PrecisionParams& p) {
  if (!(p.keep_prob > 0.0 && p.keep_prob <= 1.0)) {
    throw ArgumentError("model_precision: keep probability must lie in (0,1]");
  }
  if (!(p.length_scale_sq > 0.0) || !(p.sample_count > 0.0) || !(p.weight_decay > 0.0)) {
    throw ArgumentError("model_precision: length scale, sample count and weight decay must be "
                        "positive");
  }
  return p.keep_prob * p.length_scale_sq / (2.0 * p.sample_count * p.weight_decay);
}

struct PredictiveStats {
  Tensor mean;
  Tensor variance;
  Tensor std;
  std::size_t T = 0;
  double tau_inverse_offset = 0.0;
};

// How tau enters the statistics.
enum class TauMode {
  Empirical,       // no tau term
  VarianceOffset,  // variance += 1/tau
  Literal,         // variance += 1/tau and mean += 1/tau
};

inline std::string tau_mode_name(TauMode mode) {
  switch (mode) {
    case TauMode::Empirical: return "empirical";
    case TauMode::VarianceOffset: return "variance_offset";
    case TauMode::Literal: return "literal";
  }
  return "unknown";
}

inline TauMode parse_tau_mode(const std::string& name) {
  for (auto m : {TauMode::Empirical, TauMode::VarianceOffset, TauMode::Literal}) {
    if (tau_mode_name(m) == name) return m;
  }
  throw ConfigError("unknown tau mode '" + name +
                    "' (expected empirical, variance_offset or literal)");
}

// Empirical mean and population variance (1/T) of the samples, per class.
// With `tau`, 1/tau is added to every variance entry (and to the mean in
// TauMode::Literal).
inline PredictiveStats predictive_stats(std::span<const Tensor> samples,
                                        std::optional<double> tau = std::nullopt,
                                        TauMode tau_mode = TauMode::VarianceOffset) {
  if (samples.empty()) throw ArgumentError("predictive_stats: no samples");
  const std::size_t classes = samples.front().size();
  if (classes == 0) throw ArgumentError("predictive_stats: empty sample");
  for (const auto& s : samples) {
    if (s.size() != classes) {
      throw DimensionError("predictive_stats: samples of length " + std::to_string(classes) +
                           " and " + std::to_string(s.size()));
    }
  }
  if (tau && !(*tau > 0.0)) throw ArgumentError("predictive_stats: tau must be positive");
  const double T = static_cast<double>(samples.size());
  // Moments are accumulated about the first sample, so identical samples give
  // their common value and zero variance exactly.
  const Tensor& shift = samples.front();
  std::vector<double> first(classes, 0.0), second(classes, 0.0);
  for (const auto& s : samples) {
    for (std::size_t c = 0; c < classes; ++c) {
      const double d = s[c] - shift[c];
      first[c] += d;
      second[c] += d * d;
    }
  }
  PredictiveStats stats;
  stats.T = samples.size();
  stats.mean = Tensor({classes});
  stats.variance = Tensor({classes});
  for (std::size_t c = 0; c < classes; ++c) {
    const double offset = first[c] / T;
    const double mean = shift[c] + offset;
    const double var = second[c] / T - offset * offset;
    if (var < -kNegativeTolerance) {
      throw NumericalError("predictive_stats: variance " + std::to_string(var) +
                           " below tolerance for class " + std::to_string(c));
    }
    stats.mean[c] = mean;
    stats.variance[c] = var < 0.0 ? 0.0 : var;
  }
  if (tau && tau_mode != TauMode::Empirical) {
    const double offset = 1.0 / *tau;
    stats.tau_inverse_offset = offset;
    for (auto& v : stats.variance.data()) v += offset;
    if (tau_mode == TauMode::Literal) {
      for (auto& v : stats.mean.data()) v += offset;
    }
  }
  stats.std = sqrt(stats.variance);
  return stats;
}

inline void require_valid_stats(const PredictiveStats& stats) {
  if (stats.T == 0 || stats.mean.empty() || stats.mean.shape() != stats.std.shape()) {
    throw ArgumentError("invalid predictive statistics");
  }
}

// z * sigma / sqrt(T), elementwise.
inline Tensor interval_half_width(const PredictiveStats& stats, const ConfidenceConfig& conf) {
  require_valid_stats(stats);
  const double factor = conf.z / std::sqrt(static_cast<double>(stats.T));
  return map(stats.std, [factor](double s) { return factor * s; });
}

inline std::pair<Tensor, Tensor> confidence_interval(const PredictiveStats& stats,
                                                     const ConfidenceConfig& conf) {
  const Tensor half = interval_half_width(stats, conf);
  return {sub(stats.mean, half), add(stats.mean, half)};
}

// Passes needed so that the interval half-width shrinks to rho * |mean|:
// ceil((z sigma / (rho mean))^2), at least 1.
inline std::size_t required_T(double mean, double std_dev, const ConfidenceConfig& conf,
                              double rho = 1.0) {
  if (mean == 0.0) throw ArgumentError("required_T: mean is zero, ratio undefined");
  if (!(std_dev >= 0.0)) throw ArgumentError("required_T: negative standard deviation");
  if (!(rho > 0.0)) throw ArgumentError("required_T: rho must be positive");
  const double ratio = conf.z * std_dev / (rho * mean);
  const double t = std::ceil(ratio * ratio);
  return t < 1.0 ? 1 : static_cast<std::size_t>(t);
}

// Behavior-adjusted scores. Plain needs the single deterministic output, the
// other modes need the statistics.
inline Tensor apply_behavior(BehaviorMode mode, const ConfidenceConfig& conf,
                             const PredictiveStats* stats, const Tensor* plain = nullptr) {
  if (mode == BehaviorMode::Plain) {
    if (!plain) throw ArgumentError("apply_behavior: plain mode needs the deterministic output");
    return *plain;
  }
  if (!stats) {
    throw ArgumentError("apply_behavior: mode " + mode_name(mode) + " needs predictive statistics");
  }
  if (mode == BehaviorMode::Mean) return stats->mean;
  auto [lower, upper] = confidence_interval(*stats, conf);
  return mode == BehaviorMode::Optimistic ? upper : lower;
}

// T head passes over features computed once. Pass t uses the mask keyed by
// (base_seed, t); the result is independent of the thread count.
inline std::vector<Tensor> sample_predictions(const SplitNetwork& net, const Tensor& x,
                                              std::size_t T, double p_drop,
                                              std::uint64_t base_seed, unsigned threads = 1) {
  validate_split(net);
  if (T == 0) throw ArgumentError("sample_predictions: T must be at least 1");
  if (!(p_drop >= 0.0 && p_drop < 1.0)) {
    throw ArgumentError("sample_predictions: p_drop = " + std::to_string(p_drop) +
                        " outside [0,1)");
  }
  const Tensor features = compute_features(net, x);
  std::vector<Tensor> out(T);
  parallel_for(T, threads, [&](std::size_t t) {
    const auto mask = make_dropout_mask(net, 1.0 - p_drop, base_seed, static_cast<std::uint32_t>(t));
    out[t] = forward_head(net, features, mask);
  });
  return out;
}

// Settings for scoring one input.
struct ScoringConfig {
  BehaviorMode mode = BehaviorMode::Mean;
  std::size_t T = 100;
  double p_drop = 0.5;
  ConfidenceConfig confidence{};
  TauMode tau_mode = TauMode::Empirical;
  std::optional<double> tau;
  unsigned threads = 1;
};

inline Tensor score_sample(const SplitNetwork& net, const Tensor& x, const ScoringConfig& cfg,
                           std::uint64_t seed) {
  if (cfg.mode == BehaviorMode::Plain) {
    const Tensor plain = forward_deterministic(net, x);
    return apply_behavior(cfg.mode, cfg.confidence, nullptr, &plain);
  }
  const auto samples = sample_predictions(net, x, cfg.T, cfg.p_drop, seed, cfg.threads);
  const auto stats = predictive_stats(
      samples, cfg.tau_mode == TauMode::Empirical ? std::nullopt : cfg.tau, cfg.tau_mode);
  return apply_behavior(cfg.mode, cfg.confidence, &stats);
}

}  // namespace mcdrop
