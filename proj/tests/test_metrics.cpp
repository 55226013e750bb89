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

#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "mcdrop/metrics.hpp"
#include "test_support.hpp"

namespace mcdrop {
namespace {

Tensor one_hot(std::initializer_list<std::size_t> classes, std::size_t count) {
  Tensor t({classes.size(), count});
  std::size_t i = 0;
  for (auto c : classes) t.at(i++, c) = 1.0;
  return t;
}

TEST(TopK, Examples) {
  const auto scores = Tensor::matrix({{0.7, 0.3}, {0.2, 0.8}});
  const auto labels = one_hot({0, 0}, 2);
  EXPECT_EQ(top_k_error(scores, labels, 1), 0.5);
  EXPECT_EQ(top_k_error(scores, labels, 2), 0.0);
  EXPECT_EQ(top_k_error(Tensor({3, 4}, 0.25), one_hot({0, 0, 0}, 4), 1), 0.0);
  EXPECT_EQ(top_k_error(Tensor({3, 4}, 0.25), one_hot({1, 1, 1}, 4), 1), 1.0);
}

TEST(TopK, Errors) {
  const auto scores = Tensor::matrix({{0.7, 0.3}});
  EXPECT_THROW(top_k_error(scores, one_hot({0}, 2), 0), ArgumentError);
  EXPECT_THROW(top_k_error(scores, one_hot({0}, 2), 3), ArgumentError);
  EXPECT_THROW(top_k_error(scores, Tensor::matrix({{1, 1}}), 1), LabelError);
  EXPECT_THROW(top_k_error(scores, one_hot({0}, 3), 1), DimensionError);
}

TEST(TopK, MonotoneInK) {
  CounterStream rng(1, Stream::Bench);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50, classes = 7;
    const auto scores = testing::random_tensor({n, classes}, rng, 0.0, 1.0);
    Tensor labels({n, classes});
    for (std::size_t i = 0; i < n; ++i) labels.at(i, rng.index(classes)) = 1.0;
    double prev = 1.0;
    for (std::size_t k = 1; k <= classes; ++k) {
      const double e = top_k_error(scores, labels, k);
      EXPECT_LE(e, prev);
      prev = e;
    }
    EXPECT_EQ(prev, 0.0);
  }
}

std::vector<double> v(std::initializer_list<double> xs) { return xs; }

TEST(AveragePrecision, Examples) {
  EXPECT_EQ(average_precision(v({0.9, 0.8, 0.1, 0.05}), v({1, 1, 0, 0})), 1.0);
  EXPECT_NEAR(average_precision(v({0.9, 0.8, 0.7}), v({1, 0, 1})), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_NEAR(average_precision(v({0.9, 0.8, 0.7}), v({1, 0, 1})), 0.833333, 1e-6);
  for (std::size_t n : {1u, 2u, 5u, 17u}) {
    std::vector<double> scores(n), labels(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) scores[i] = double(n - i);
    labels[n - 1] = 1.0;
    EXPECT_NEAR(average_precision(scores, labels), 1.0 / double(n), 1e-15);
  }
}

TEST(AveragePrecision, TiesByAscendingIndex) {
  EXPECT_EQ(average_precision(v({0.5, 0.5}), v({1, 0})), 1.0);
  EXPECT_EQ(average_precision(v({0.5, 0.5}), v({0, 1})), 0.5);
}

TEST(AveragePrecision, Errors) {
  EXPECT_THROW(average_precision(v({0.1, 0.2}), v({0, 0})), UndefinedMetricError);
  EXPECT_THROW(average_precision(v({0.1, 0.2}), v({0.5, 1})), LabelError);
  EXPECT_THROW(average_precision(v({0.1}), v({0, 1})), DimensionError);
}

TEST(AveragePrecision, InvariantUnderMonotoneTransform) {
  CounterStream rng(2, Stream::Bench);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> scores(40), labels(40);
    for (auto& s : scores) s = rng.uniform(-2.0, 2.0);
    for (auto& l : labels) l = rng.bernoulli(0.3) ? 1.0 : 0.0;
    labels[rng.index(40)] = 1.0;
    std::vector<double> moved(scores.size());
    std::transform(scores.begin(), scores.end(), moved.begin(),
                   [](double s) { return std::exp(3.0 * s) + 7.0; });
    EXPECT_EQ(average_precision(scores, labels), average_precision(moved, labels));
  }
}

TEST(MeanAveragePrecision, Examples) {
  const auto labels = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {1, 1, 0}});
  EXPECT_EQ(mean_average_precision(labels, labels).map, 1.0);
  // Class 0 ranks its single positive first (AP 1), class 1 last of two (AP 0.5).
  const auto scores = Tensor::matrix({{0.9, 0.8}, {0.1, 0.2}});
  const auto two = Tensor::matrix({{1, 0}, {0, 1}});
  const auto m = mean_average_precision(scores, two);
  EXPECT_EQ(m.map, 0.75);
  ASSERT_EQ(m.per_class.size(), 2u);
  EXPECT_EQ(*m.per_class[1], 0.5);
}

TEST(MeanAveragePrecision, SkipsClassesWithoutPositives) {
  const auto labels = Tensor::matrix({{1, 0, 0}, {0, 1, 0}});
  const auto m = mean_average_precision(labels, labels);
  EXPECT_EQ(m.map, 1.0);
  EXPECT_EQ(m.skipped, std::vector<std::size_t>{2});
  EXPECT_FALSE(m.per_class[2].has_value());
  EXPECT_THROW(mean_average_precision(Tensor({2, 2}), Tensor({2, 2})), UndefinedMetricError);
}

TEST(MeanAveragePrecision, PermutationInvariant) {
  CounterStream rng(3, Stream::Bench);
  const std::size_t n = 30, classes = 4;
  const auto scores = testing::random_tensor({n, classes}, rng, 0.0, 1.0);
  Tensor labels({n, classes});
  for (auto& l : labels.data()) l = rng.bernoulli(0.4) ? 1.0 : 0.0;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
  Tensor ps({n, classes}), pl({n, classes});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      ps.at(i, c) = scores.at(perm[i], c);
      pl.at(i, c) = labels.at(perm[i], c);
    }
  }
  EXPECT_NEAR(mean_average_precision(scores, labels).map, mean_average_precision(ps, pl).map,
              1e-15);
}

TEST(PermutationCount, Examples) {
  EXPECT_EQ(permutation_count({0.001, 0.5, 0}), 250000u);
  EXPECT_EQ(permutation_count({0.5, 0.5, 0}), 1u);
  EXPECT_EQ(permutation_count({0.01, 0.5, 0}), 2500u);
  EXPECT_EQ(permutation_count({0.3, 0.1, 0}), 1u);
  EXPECT_THROW(permutation_count({0.0, 0.5, 0}), ArgumentError);
  EXPECT_THROW(permutation_count({0.01, 1.0, 0}), ArgumentError);
}

TEST(PermutationTest, IdenticalInputsGiveOne) {
  const std::vector<int> a{1, 0, 1, 1, 0};
  const auto r = paired_permutation_test(a, a, {0.01, 0.5, 9});
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.n, 2500u);
}

TEST(PermutationTest, AllVersusNone) {
  const std::vector<int> a(20, 1), b(20, 0);
  const auto r = paired_permutation_test(a, b, {0.005, 0.5, 4});
  EXPECT_EQ(r.n, 10000u);
  EXPECT_EQ(r.statistic, 1.0);
  EXPECT_LT(r.p_value, 0.01);
  EXPECT_GT(r.p_value, 0.0);
}

TEST(PermutationTest, SymmetricAndThreadIndependent) {
  CounterStream rng(5, Stream::Bench);
  std::vector<int> a(60), b(60);
  for (auto& x : a) x = rng.bernoulli(0.7);
  for (auto& x : b) x = rng.bernoulli(0.5);
  const PermutationConfig cfg{0.01, 0.5, 77};
  const auto ab = paired_permutation_test(a, b, cfg);
  const auto ba = paired_permutation_test(b, a, cfg);
  EXPECT_EQ(ab.p_value, ba.p_value);
  EXPECT_EQ(ab.statistic, ba.statistic);
  EXPECT_EQ(ab.p_value, paired_permutation_test(a, b, cfg, 3).p_value);
  EXPECT_GT(ab.p_value, 0.0);
  EXPECT_LE(ab.p_value, 1.0);
}

TEST(PermutationTest, LengthMismatch) {
  EXPECT_THROW(paired_permutation_test(std::vector<int>{1}, std::vector<int>{1, 0}, {}),
               DimensionError);
}

TEST(PermutationTest, MatchesExactEnumeration) {
  CounterStream rng(6, Stream::Bench);
  const PermutationConfig cfg{std::sqrt(0.25 / 100000.0), 0.5, 13};
  ASSERT_EQ(permutation_count(cfg), 100000u);
  for (std::size_t n : {3u, 6u, 9u, 12u}) {
    std::vector<int> a(n), b(n);
    for (auto& x : a) x = rng.bernoulli(0.8);
    for (auto& x : b) x = rng.bernoulli(0.4);
    const double exact = testing::exact_permutation_p(a, b);
    EXPECT_NEAR(paired_permutation_test(a, b, cfg).p_value, exact, 0.01) << "n = " << n;
  }
}

TEST(Aggregates, ClassificationAndMultiLabel) {
  const auto scores = Tensor::matrix({{0.7, 0.3, 0.0, 0.0}, {0.2, 0.8, 0.0, 0.0}});
  const auto agg = compute_aggregates(scores, one_hot({0, 0}, 4), true);
  EXPECT_EQ(agg.top_k_error.size(), 2u);
  EXPECT_EQ(agg.top_k_error.at(1), 0.5);
  EXPECT_EQ(agg.top_k_error.at(3), 0.0);
  EXPECT_FALSE(agg.map.has_value());
  const auto multi = compute_aggregates(scores, Tensor::matrix({{1, 0, 0, 0}, {1, 1, 0, 0}}), false);
  ASSERT_TRUE(multi.map.has_value());
  EXPECT_EQ(*multi.map, 1.0);
  EXPECT_TRUE(multi.top_k_error.empty());
}

TEST(LabelHash, SensitiveToContentAndShape) {
  const auto a = one_hot({0, 1}, 3);
  EXPECT_EQ(label_hash(a), label_hash(one_hot({0, 1}, 3)));
  EXPECT_NE(label_hash(a), label_hash(one_hot({1, 0}, 3)));
  EXPECT_NE(label_hash(Tensor({2, 3})), label_hash(Tensor({3, 2})));
  EXPECT_EQ(label_hash(a).size(), 16u);
}

}  // namespace
}  // namespace mcdrop
