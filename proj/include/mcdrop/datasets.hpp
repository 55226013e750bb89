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

// Seeded synthetic datasets and training-time augmentation.
//
// Blobs: points around the unit vectors e_0 .. e_{C-1} of R^dim (a regular
// simplex), isotropic Gaussian spread, one-hot labels, classes assigned
// round-robin by sample index.
//
// MultiHotPatches: [1, S, S] images holding 0..max_objects glyphs of size 4x4
// on a grid of 5x5 cells, one distinct glyph shape per class, plus Gaussian
// background noise. Labels are multi-hot presence vectors.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mcdrop/errors.hpp"
#include "mcdrop/rng.hpp"
#include "mcdrop/tensor.hpp"

namespace mcdrop {

struct Dataset {
  std::vector<Tensor> inputs;
  Tensor labels;  // [samples, classes]

  std::size_t size() const noexcept { return inputs.size(); }
  std::size_t classes() const { return labels.dim(1); }
  Tensor label(std::size_t i) const { return Tensor::vector(labels.row(i)); }
  bool operator==(const Dataset&) const = default;
};

enum class DatasetKind { Blobs, MultiHotPatches };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::Blobs;
  std::size_t classes = 3;
  // Blobs
  std::size_t dim = 8;
  double spread = 0.5;
  // MultiHotPatches
  std::size_t image_size = 16;
  std::size_t max_objects = 3;
  double background_noise = 0.1;

  std::size_t train_count = 500;
  std::size_t test_count = 500;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kGlyphSize = 4;
inline constexpr std::size_t kGlyphCell = kGlyphSize + 1;

// Filled square, hollow square, plus, diagonal cross, bars, checkerboard.
inline constexpr std::array<std::array<const char*, kGlyphSize>, 6> kGlyphs{{
    {"1111", "1111", "1111", "1111"},
    {"1111", "1001", "1001", "1111"},
    {"0110", "1111", "1111", "0110"},
    {"1001", "0110", "0110", "1001"},
    {"1111", "0000", "1111", "0000"},
    {"1010", "0101", "1010", "0101"},
}};

namespace detail {

inline void validate_spec(const DatasetSpec& spec) {
  if (spec.train_count == 0 || spec.test_count == 0) {
    throw GenerationError("dataset: train_count and test_count must be at least 1");
  }
  if (spec.classes == 0) throw GenerationError("dataset: classes must be at least 1");
  if (spec.kind == DatasetKind::Blobs) {
    if (spec.dim < spec.classes) {
      throw GenerationError("blobs: dim " + std::to_string(spec.dim) + " < classes " +
                            std::to_string(spec.classes));
    }
    if (!(spec.spread >= 0.0)) throw GenerationError("blobs: spread must be nonnegative");
    return;
  }
  if (spec.image_size < 8) throw GenerationError("patches: image_size must be at least 8");
  if (spec.classes > kGlyphs.size()) {
    throw GenerationError("patches: at most " + std::to_string(kGlyphs.size()) + " classes");
  }
  const std::size_t cells = (spec.image_size / kGlyphCell) * (spec.image_size / kGlyphCell);
  if (spec.max_objects > cells) {
    throw GenerationError("patches: " + std::to_string(spec.max_objects) +
                          " objects do not fit into a " + std::to_string(spec.image_size) +
                          "x" + std::to_string(spec.image_size) + " image (" +
                          std::to_string(cells) + " slots)");
  }
  if (!(spec.background_noise >= 0.0)) {
    throw GenerationError("patches: background noise must be nonnegative");
  }
}

inline std::pair<Tensor, std::vector<double>> blob_sample(const DatasetSpec& spec,
                                                          std::size_t index) {
  CounterStream rng(spec.seed, Stream::Data, static_cast<std::uint32_t>(index), 0);
  const std::size_t cls = index % spec.classes;
  Tensor x({spec.dim});
  for (std::size_t d = 0; d < spec.dim; ++d) {
    x[d] = (d == cls ? 1.0 : 0.0) + spec.spread * rng.normal();
  }
  std::vector<double> label(spec.classes, 0.0);
  label[cls] = 1.0;
  return {std::move(x), std::move(label)};
}

inline std::pair<Tensor, std::vector<double>> patch_sample(const DatasetSpec& spec,
                                                           std::size_t index) {
  CounterStream rng(spec.seed, Stream::Data, static_cast<std::uint32_t>(index), 1);
  const std::size_t size = spec.image_size;
  const std::size_t per_row = size / kGlyphCell;
  Tensor img({1, size, size});
  for (auto& v : img.data()) v = spec.background_noise * rng.normal();
  std::vector<double> label(spec.classes, 0.0);
  const std::size_t objects = rng.index(spec.max_objects + 1);
  std::vector<std::size_t> slots(per_row * per_row);
  for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
  for (std::size_t k = 0; k < objects; ++k) {
    // Partial Fisher-Yates: slots[k] becomes a fresh, unused slot.
    std::swap(slots[k], slots[k + rng.index(slots.size() - k)]);
    const std::size_t cls = rng.index(spec.classes);
    const std::size_t oy = (slots[k] / per_row) * kGlyphCell + rng.index(kGlyphCell - kGlyphSize + 1);
    const std::size_t ox = (slots[k] % per_row) * kGlyphCell + rng.index(kGlyphCell - kGlyphSize + 1);
    const double intensity = rng.uniform(0.7, 1.0);
    for (std::size_t y = 0; y < kGlyphSize; ++y) {
      for (std::size_t x = 0; x < kGlyphSize; ++x) {
        if (kGlyphs[cls][y][x] == '1') img.at(0, oy + y, ox + x) += intensity;
      }
    }
    label[cls] = 1.0;
  }
  return {std::move(img), std::move(label)};
}

}  // namespace detail

// Train samples use indices [0, train_count), test samples the following
// test_count indices; every sample is a pure function of (seed, index).
inline std::pair<Dataset, Dataset> generate(const DatasetSpec& spec) {
  detail::validate_spec(spec);
  auto build = [&](std::size_t first, std::size_t count) {
    Dataset ds;
    ds.inputs.reserve(count);
    std::vector<double> labels;
    labels.reserve(count * spec.classes);
    for (std::size_t i = first; i < first + count; ++i) {
      auto [x, y] = spec.kind == DatasetKind::Blobs ? detail::blob_sample(spec, i)
                                                    : detail::patch_sample(spec, i);
      ds.inputs.push_back(std::move(x));
      labels.insert(labels.end(), y.begin(), y.end());
    }
    ds.labels = Tensor({count, spec.classes}, std::move(labels));
    return ds;
  };
  return {build(0, spec.train_count), build(spec.train_count, spec.test_count)};
}

// Shifts the spatial axes of a [C,H,W] or [H,W] image by (dy, dx) pixels,
// filling uncovered pixels with zero.
inline Tensor translate(const Tensor& image, long dy, long dx) {
  if (image.rank() != 2 && image.rank() != 3) {
    throw DimensionError("translate: expects an image, got shape " +
                         shape_string(image.shape()));
  }
  const std::size_t channels = image.rank() == 3 ? image.dim(0) : 1;
  const long h = static_cast<long>(image.dim(image.rank() - 2));
  const long w = static_cast<long>(image.dim(image.rank() - 1));
  Tensor out(image.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const std::size_t base = c * static_cast<std::size_t>(h * w);
    for (long y = 0; y < h; ++y) {
      const long sy = y - dy;
      if (sy < 0 || sy >= h) continue;
      for (long x = 0; x < w; ++x) {
        const long sx = x - dx;
        if (sx < 0 || sx >= w) continue;
        out[base + static_cast<std::size_t>(y * w + x)] =
            image[base + static_cast<std::size_t>(sy * w + sx)];
      }
    }
  }
  return out;
}

struct AugmentOps {
  double noise_sigma = 0.0;
  // Maximum shift as a fraction of the image side; images only.
  double max_translation = 0.0;
};

// Random integer translation up to floor(max_translation * side) pixels per
// axis, then additive Gaussian noise. Labels are not touched.
inline Tensor augment(const Tensor& sample, const AugmentOps& ops, std::uint64_t seed) {
  CounterStream rng(seed, Stream::Augment);
  Tensor out = sample;
  if (ops.max_translation > 0.0) {
    if (sample.rank() < 2) throw DimensionError("augment: translation needs an image sample");
    const auto side = std::min(sample.dim(sample.rank() - 2), sample.dim(sample.rank() - 1));
    const auto max_shift = static_cast<long>(ops.max_translation * static_cast<double>(side));
    if (max_shift > 0) {
      const auto span = static_cast<std::uint64_t>(2 * max_shift + 1);
      const long dy = static_cast<long>(rng.index(span)) - max_shift;
      const long dx = static_cast<long>(rng.index(span)) - max_shift;
      out = translate(out, dy, dx);
    }
  }
  if (ops.noise_sigma > 0.0) {
    for (auto& v : out.data()) v += ops.noise_sigma * rng.normal();
  }
  return out;
}

}  // namespace mcdrop
