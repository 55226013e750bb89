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

#include <gtest/gtest.h>

#include "mcdrop/rng.hpp"
#include "mcdrop/tensor.hpp"
#include "test_support.hpp"

namespace mcdrop {
namespace {

TEST(Tensor, ShapeInvariant) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  EXPECT_THROW(Tensor({2, 0}), DimensionError);
  const Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
}

TEST(Matmul, Identity) {
  const auto m = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(Tensor::matrix({{1, 0}, {0, 1}}), m), m);
}

TEST(Matmul, HandComputed) {
  EXPECT_EQ(matmul(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{5, 6}, {7, 8}})),
            Tensor::matrix({{19, 22}, {43, 50}}));
}

TEST(Matmul, ZeroLeftOperand) {
  const auto out = matmul(Tensor::matrix({{0, 0}, {0, 0}}), Tensor::matrix({{1, 2, 3}, {4, 5, 6}}));
  EXPECT_EQ(out, Tensor({2, 3}));
}

TEST(Matmul, MismatchNamesBothShapes) {
  try {
    matmul(Tensor({2, 3}), Tensor({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2,3] by [2,3]"), std::string::npos);
  }
}

TEST(Matmul, AssociativeOnRandomMatrices) {
  CounterStream rng(11, Stream::Bench);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(5), k = 1 + rng.index(5), m = 1 + rng.index(5),
                      p = 1 + rng.index(5);
    const auto a = testing::random_tensor({n, k}, rng);
    const auto b = testing::random_tensor({k, m}, rng);
    const auto c = testing::random_tensor({m, p}, rng);
    const auto left = matmul(matmul(a, b), c);
    const auto right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) EXPECT_NEAR(left[i], right[i], 1e-9);
  }
}

TEST(Conv2d, UnitKernelIsIdentity) {
  CounterStream rng(3, Stream::Bench);
  const auto x = testing::random_tensor({1, 5, 6}, rng);
  EXPECT_EQ(conv2d_valid(x, Tensor({1, 1, 1, 1}, 1.0), Tensor({1})), x);
}

TEST(Conv2d, UnitKernelSumsChannels) {
  const Tensor x({2, 2, 2}, std::vector<double>{1, 2, 3, 4, 10, 20, 30, 40});
  const auto out = conv2d_valid(x, Tensor({1, 2, 1, 1}, 1.0), Tensor({1}));
  EXPECT_EQ(out, Tensor({1, 2, 2}, std::vector<double>{11, 22, 33, 44}));
}

TEST(Conv2d, AllOnesThreeByThree) {
  const auto out = conv2d_valid(Tensor({1, 3, 3}, 1.0), Tensor({1, 1, 3, 3}, 1.0), Tensor({1}));
  ASSERT_EQ(out.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(out[0], 9.0);
}

TEST(Conv2d, ZeroKernelGivesBias) {
  const auto out = conv2d_valid(Tensor({2, 4, 4}, 3.0), Tensor({3, 2, 2, 2}),
                                Tensor::vector({0.5, -1.0, 2.0}));
  ASSERT_EQ(out.shape(), (Shape{3, 3, 3}));
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(out[i], 0.5);
    EXPECT_EQ(out[9 + i], -1.0);
    EXPECT_EQ(out[18 + i], 2.0);
  }
}

TEST(Conv2d, HandComputedCorrelation) {
  // Cross-correlation, not convolution: the kernel is not flipped.
  const Tensor x({1, 2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Tensor k({1, 1, 2, 2}, std::vector<double>{1, 0, 0, -1});
  EXPECT_EQ(conv2d_valid(x, k, Tensor({1})), Tensor({1, 1, 2}, std::vector<double>{-4, -4}));
}

TEST(Conv2d, ShapeErrors) {
  EXPECT_THROW(conv2d_valid(Tensor({2, 3, 3}), Tensor({1, 1, 3, 3}), Tensor({1})), DimensionError);
  EXPECT_THROW(conv2d_valid(Tensor({1, 2, 2}), Tensor({1, 1, 3, 3}), Tensor({1})), DimensionError);
  EXPECT_THROW(conv2d_valid(Tensor({1, 3, 3}), Tensor({1, 1, 3, 3}), Tensor({2})), DimensionError);
}

TEST(Elementwise, Examples) {
  EXPECT_EQ(square(Tensor::vector({2, -3})), Tensor::vector({4, 9}));
  EXPECT_DOUBLE_EQ(sqrt(Tensor::vector({0.01}))[0], 0.1);
  EXPECT_EQ(clamp_min(Tensor::vector({-1e-15, 0.5}), 0.0), Tensor::vector({0, 0.5}));
  EXPECT_EQ(add(Tensor::vector({1, 2}), Tensor::vector({3, 4})), Tensor::vector({4, 6}));
  EXPECT_EQ(sub(Tensor::vector({1, 2}), Tensor::vector({3, 4})), Tensor::vector({-2, -2}));
  EXPECT_EQ(mul(Tensor::vector({1, 2}), Tensor::vector({3, 4})), Tensor::vector({3, 8}));
  EXPECT_EQ(scale(Tensor::vector({1, -2}), 0.5), Tensor::vector({0.5, -1}));
}

TEST(Elementwise, ShapeMismatch) {
  EXPECT_THROW(add(Tensor({2}), Tensor({3})), DimensionError);
  EXPECT_THROW(mul(Tensor({2, 1}), Tensor({2})), DimensionError);
}

TEST(Elementwise, SqrtNegativeTolerance) {
  EXPECT_EQ(sqrt(Tensor::vector({-5e-13}))[0], 0.0);
  EXPECT_THROW(sqrt(Tensor::vector({-1e-9})), NumericalError);
}

TEST(Elementwise, InputsAreNotMutated) {
  const auto a = Tensor::vector({1, -2, 3});
  const auto copy = a;
  (void)square(a);
  (void)clamp_min(a, 0.0);
  (void)add(a, a);
  (void)scale(a, 3.0);
  EXPECT_EQ(a, copy);
}

}  // namespace
}  // namespace mcdrop
