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
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcdrop/errors.hpp"

namespace mcdrop {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

// Dense row-major array of doubles. A default-constructed tensor is empty
// (rank 0, no elements) and only serves as a placeholder.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != checked_size(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
  }

  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }

  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  double& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  // Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_);
  }

  std::vector<double> row(std::size_t r) const {
    const std::size_t c = shape_.at(1);
    return {data_.begin() + static_cast<std::ptrdiff_t>(r * c),
            data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * c)};
  }

  bool operator==(const Tensor&) const = default;

 private:
  static std::size_t checked_size(const Shape& shape) {
    for (auto d : shape) {
      if (d == 0) throw DimensionError("zero-sized dimension in shape " + shape_string(shape));
    }
    return shape_size(shape);
  }

  Shape shape_;
  std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                         shape_string(b.shape()));
  }
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a.at(i, p);
      for (std::size_t j = 0; j < m; ++j) out.at(i, j) += aip * b.at(p, j);
    }
  }
  return out;
}

// y = W x + b for W of shape [out, in] and x of any shape with `in` elements.
inline Tensor affine(const Tensor& weight, const Tensor& bias, const Tensor& x) {
  const std::size_t rows = weight.dim(0), cols = weight.dim(1);
  if (x.size() != cols || bias.size() != rows) {
    throw DimensionError("affine: weight " + shape_string(weight.shape()) + ", bias " +
                         shape_string(bias.shape()) + ", input " + shape_string(x.shape()));
  }
  Tensor out({rows});
  const auto w = weight.data();
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = bias[r];
    const double* wr = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * in[c];
    out[r] = acc;
  }
  return out;
}

// Valid cross-correlation, stride 1: input [C,H,W], kernels [K,C,kH,kW],
// bias [K] -> [K, H-kH+1, W-kW+1].
inline Tensor conv2d_valid(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  if (input.rank() != 3 || kernels.rank() != 4 || kernels.dim(1) != input.dim(0) ||
      kernels.dim(2) > input.dim(1) || kernels.dim(3) > input.dim(2) ||
      bias.size() != kernels.dim(0)) {
    throw DimensionError("conv2d_valid: input " + shape_string(input.shape()) + ", kernels " +
                         shape_string(kernels.shape()) + ", bias " +
                         shape_string(bias.shape()));
  }
  const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
  const std::size_t filters = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  const std::size_t oh = height - kh + 1, ow = width - kw + 1;
  Tensor out({filters, oh, ow});
  const double* in = input.data().data();
  const double* ker = kernels.data().data();
  double* o = out.data().data();
  for (std::size_t k = 0; k < filters; ++k) {
    double* plane = o + k * oh * ow;
    std::fill(plane, plane + oh * ow, bias[k]);
    for (std::size_t c = 0; c < channels; ++c) {
      const double* src = in + c * height * width;
      const double* kern = ker + (k * channels + c) * kh * kw;
      for (std::size_t dy = 0; dy < kh; ++dy) {
        for (std::size_t dx = 0; dx < kw; ++dx) {
          const double kv = kern[dy * kw + dx];
          for (std::size_t y = 0; y < oh; ++y) {
            const double* s = src + (y + dy) * width + dx;
            double* d = plane + y * ow;
            for (std::size_t x = 0; x < ow; ++x) d[x] += kv * s[x];
          }
        }
      }
    }
  }
  return out;
}

template <typename Fn>
Tensor map(const Tensor& a, Fn&& fn) {
  Tensor out = a;
  for (auto& v : out.data()) v = fn(v);
  return out;
}

template <typename Fn>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, Fn&& fn) {
  require_same_shape(a, b, op);
  Tensor out = a;
  auto o = out.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(o[i], bv[i]);
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}
inline Tensor scale(const Tensor& a, double s) {
  return map(a, [s](double x) { return x * s; });
}
inline Tensor square(const Tensor& a) {
  return map(a, [](double x) { return x * x; });
}
inline Tensor clamp_min(const Tensor& a, double lo) {
  return map(a, [lo](double x) { return x < lo ? lo : x; });
}

// Negative values down to -tolerance are treated as zero; anything lower is
// an error rather than a silent NaN.
inline constexpr double kNegativeTolerance = 1e-12;

inline Tensor sqrt(const Tensor& a, double tolerance = kNegativeTolerance) {
  return map(a, [tolerance](double x) {
    if (x < 0.0) {
      if (x < -tolerance) {
        throw NumericalError("sqrt of negative value " + std::to_string(x));
      }
      return 0.0;
    }
    return std::sqrt(x);
  });
}

inline bool all_finite(const Tensor& a) {
  return std::all_of(a.data().begin(), a.data().end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace mcdrop
