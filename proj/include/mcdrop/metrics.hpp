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
#include <cstdint>
#include <cstdlib>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcdrop/errors.hpp"
#include "mcdrop/parallel.hpp"
#include "mcdrop/rng.hpp"
#include "mcdrop/tensor.hpp"

namespace mcdrop {

namespace detail {

inline void require_matrix_pair(const Tensor& scores, const Tensor& labels, const char* op) {
  if (scores.rank() != 2 || labels.rank() != 2 || scores.shape() != labels.shape()) {
    throw DimensionError(std::string(op) + ": scores " + shape_string(scores.shape()) +
                         " and labels " + shape_string(labels.shape()) +
                         " must be matrices of equal shape");
  }
}

}  // namespace detail

// Index of the single positive entry of a one-hot row.
inline std::size_t one_hot_class(const Tensor& labels, std::size_t row) {
  const std::size_t classes = labels.dim(1);
  std::optional<std::size_t> found;
  for (std::size_t c = 0; c < classes; ++c) {
    const double v = labels.at(row, c);
    if (v == 1.0) {
      if (found) throw LabelError("label row " + std::to_string(row) + " is not one-hot");
      found = c;
    } else if (v != 0.0) {
      throw LabelError("label row " + std::to_string(row) + " holds a non-binary value");
    }
  }
  if (!found) throw LabelError("label row " + std::to_string(row) + " has no positive class");
  return *found;
}

// Rank of class `c` in a score row: classes with a higher score, or an equal
// score and a lower index, come first.
inline std::size_t class_rank(std::span<const double> row, std::size_t c) {
  std::size_t rank = 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] > row[c] || (row[j] == row[c] && j < c)) ++rank;
  }
  return rank;
}

// Per-sample indicator: true class among the k best scores.
inline std::vector<int> top_k_correct(const Tensor& scores, const Tensor& labels, std::size_t k) {
  detail::require_matrix_pair(scores, labels, "top_k");
  const std::size_t n = scores.dim(0), classes = scores.dim(1);
  if (k == 0 || k > classes) {
    throw ArgumentError("top_k: k = " + std::to_string(k) + " outside [1, " +
                        std::to_string(classes) + "]");
  }
  std::vector<int> correct(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> row = scores.data().subspan(i * classes, classes);
    correct[i] = class_rank(row, one_hot_class(labels, i)) < k ? 1 : 0;
  }
  return correct;
}

inline double top_k_error(const Tensor& scores, const Tensor& labels, std::size_t k) {
  const auto correct = top_k_correct(scores, labels, k);
  const auto hits = std::accumulate(correct.begin(), correct.end(), std::size_t{0});
  return static_cast<double>(correct.size() - hits) / static_cast<double>(correct.size());
}

// Non-interpolated average precision: the mean, over positives, of the
// precision at each positive's rank. Ranking is by descending score, ties by
// ascending sample index.
inline double average_precision(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("average_precision: " + std::to_string(scores.size()) + " scores but " +
                         std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const double l = labels[order[r]];
    if (l != 0.0 && l != 1.0) throw LabelError("average_precision: non-binary label");
    if (l == 1.0) {
      ++positives;
      sum += static_cast<double>(positives) / static_cast<double>(r + 1);
    }
  }
  if (positives == 0) throw UndefinedMetricError("average_precision: no positive labels");
  return sum / static_cast<double>(positives);
}

struct MapResult {
  double map = 0.0;
  // Empty for classes without positives; those are excluded from the mean.
  std::vector<std::optional<double>> per_class;
  std::vector<std::size_t> skipped;
};

inline MapResult mean_average_precision(const Tensor& scores, const Tensor& labels) {
  detail::require_matrix_pair(scores, labels, "mean_average_precision");
  const std::size_t n = scores.dim(0), classes = scores.dim(1);
  MapResult result;
  std::vector<double> col_scores(n), col_labels(n);
  double total = 0.0;
  std::size_t valid = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      col_scores[i] = scores.at(i, c);
      col_labels[i] = labels.at(i, c);
    }
    try {
      const double ap = average_precision(col_scores, col_labels);
      result.per_class.emplace_back(ap);
      total += ap;
      ++valid;
    } catch (const UndefinedMetricError&) {
      result.per_class.emplace_back(std::nullopt);
      result.skipped.push_back(c);
    }
  }
  if (valid == 0) throw UndefinedMetricError("mean_average_precision: no class has positives");
  result.map = total / static_cast<double>(valid);
  return result;
}

struct PermutationConfig {
  double sigma_p = 0.001;
  double p_anchor = 0.5;
  std::uint64_t seed = 0;
};

// n = ceil(p (1 - p) / sigma_p^2), at least 1.
inline std::size_t permutation_count(const PermutationConfig& cfg) {
  if (!(cfg.sigma_p > 0.0)) throw ArgumentError("permutation_count: sigma_p must be positive");
  if (!(cfg.p_anchor > 0.0 && cfg.p_anchor < 1.0)) {
    throw ArgumentError("permutation_count: p_anchor must lie in (0,1)");
  }
  const double n = cfg.p_anchor * (1.0 - cfg.p_anchor) / (cfg.sigma_p * cfg.sigma_p);
  // Guard against 250000.00000000003 style rounding before the ceiling.
  const double rounded = std::round(n);
  const double value = std::fabs(n - rounded) < 1e-9 * std::max(1.0, n) ? rounded : std::ceil(n);
  return value < 1.0 ? 1 : static_cast<std::size_t>(value);
}

struct PermutationResult {
  double statistic = 0.0;
  std::size_t n = 0;
  std::size_t at_least_as_extreme = 0;
  double p_value = 1.0;
  std::uint64_t seed = 0;
};

// Paired randomization test on per-sample correctness (1 = correct). The
// statistic is |error_rate(a) - error_rate(b)|; each permutation exchanges
// every pair (a_i, b_i) with probability 1/2. The p-value uses add-one
// smoothing, (1 + #{permuted >= observed}) / (n + 1). Whether pair i is
// exchanged in permutation r is bit i of the Philox sequence keyed by
// (seed; r, permutation stream), so results do not depend on `threads`.
inline PermutationResult paired_permutation_test(std::span<const int> correct_a,
                                                 std::span<const int> correct_b,
                                                 const PermutationConfig& cfg,
                                                 unsigned threads = 1) {
  if (correct_a.size() != correct_b.size()) {
    throw DimensionError("paired_permutation_test: " + std::to_string(correct_a.size()) +
                         " vs " + std::to_string(correct_b.size()) + " samples");
  }
  if (correct_a.empty()) throw ArgumentError("paired_permutation_test: no samples");
  // Only discordant pairs change the statistic under a swap.
  std::vector<std::size_t> discordant;
  long long observed = 0;
  for (std::size_t i = 0; i < correct_a.size(); ++i) {
    if ((correct_a[i] != 0) != (correct_b[i] != 0)) {
      discordant.push_back(i);
      observed += correct_a[i] != 0 ? 1 : -1;
    }
  }
  const long long observed_abs = std::llabs(observed);
  PermutationResult result;
  result.n = permutation_count(cfg);
  result.seed = cfg.seed;
  result.statistic = static_cast<double>(observed_abs) / static_cast<double>(correct_a.size());

  // Per-worker counts merged in worker order.
  const unsigned workers = std::max(1u, threads);
  std::vector<std::size_t> counts(workers, 0);
  const std::size_t chunk = (result.n + workers - 1) / workers;
  parallel_for(workers, workers, [&](std::size_t w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(result.n, begin + chunk);
    std::size_t count = 0;
    for (std::size_t r = begin; r < end; ++r) {
      const CounterStream bits(cfg.seed, Stream::Permutation, static_cast<std::uint32_t>(r),
                               static_cast<std::uint32_t>(r >> 32));
      long long sum = 0;
      std::size_t cached_word = SIZE_MAX;
      std::uint32_t word = 0;
      for (std::size_t i : discordant) {
        if (i / 32 != cached_word) {
          cached_word = i / 32;
          word = bits.word_at(cached_word);
        }
        const long long d = correct_a[i] != 0 ? 1 : -1;
        sum += ((word >> (i % 32)) & 1u) ? -d : d;
      }
      if (std::llabs(sum) >= observed_abs) ++count;
    }
    counts[w] = count;
  });
  result.at_least_as_extreme = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  result.p_value = static_cast<double>(1 + result.at_least_as_extreme) /
                   static_cast<double>(result.n + 1);
  return result;
}

// Per-sample evaluation results and their aggregates.
struct EvalMetadata {
  std::string mode;
  std::size_t T = 0;
  double p_drop = 0.0;
  double alpha = 0.01;
  std::uint64_t seed = 0;
  std::string head;  // "softmax" or "sigmoid"
  std::string tau_mode = "empirical";
  double tau_inverse = 0.0;
  std::string label_hash;
  bool operator==(const EvalMetadata&) const = default;
};

struct Aggregates {
  // k -> top-k error, classification heads only.
  std::map<std::size_t, double> top_k_error;
  std::vector<std::optional<double>> per_class_ap;
  std::optional<double> map;
  bool operator==(const Aggregates&) const = default;
};

struct EvalReport {
  EvalMetadata metadata;
  Tensor scores;
  Tensor labels;
  std::vector<int> correct;  // top-1, classification heads only
  Aggregates aggregates;
};

// Top-k errors for k in {1, 3, 5} (k <= classes) when `classification`;
// per-class AP and mAP otherwise.
inline Aggregates compute_aggregates(const Tensor& scores, const Tensor& labels,
                                     bool classification) {
  Aggregates agg;
  if (classification) {
    for (std::size_t k : {1, 3, 5}) {
      if (k <= scores.dim(1)) agg.top_k_error[k] = top_k_error(scores, labels, k);
    }
  } else {
    const auto m = mean_average_precision(scores, labels);
    agg.per_class_ap = m.per_class;
    agg.map = m.map;
  }
  return agg;
}

// FNV-1a over the label matrix shape and values; identifies a test set.
inline std::string label_hash(const Tensor& labels) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  };
  for (auto d : labels.shape()) feed(d);
  for (double v : labels.data()) feed(v == 0.0 ? 0u : v == 1.0 ? 1u : 2u);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

}  // namespace mcdrop
