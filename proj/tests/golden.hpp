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

// Shared definition of the toy golden case: architecture, probe input and the
// seed-42, pass-0 head evaluation.

#pragma once

#include <cstdio>
#include <string>

#include "mcdrop/network.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop::golden {

inline constexpr std::uint64_t kSeed = 42;
inline constexpr std::uint32_t kPass = 0;
inline constexpr double kKeepProb = 0.5;

inline SplitNetwork toy_network() {
  return SplitNetwork({1, 6, 6},
                      {LayerSpec::conv(1, 2, 3, 3), LayerSpec::relu(), LayerSpec::maxpool2x2()},
                      {LayerSpec::dense(8, 16), LayerSpec::maxout(2), LayerSpec::dropout(),
                       LayerSpec::dense(8, 3), LayerSpec::softmax()});
}

inline Tensor probe_input() {
  CounterStream rng(kSeed, Stream::Bench);
  Tensor x({1, 6, 6});
  for (auto& v : x.data()) v = rng.uniform(-1.0, 1.0);
  return x;
}

inline Tensor golden_output(const SplitNetwork& net) {
  const auto mask = make_dropout_mask(net, kKeepProb, kSeed, kPass);
  return forward_head(net, compute_features(net, probe_input()), mask);
}

// One hexadecimal float per line, exact.
inline std::string format(const Tensor& y) {
  std::string out;
  char buf[64];
  for (double v : y.data()) {
    std::snprintf(buf, sizeof buf, "%a\n", v);
    out += buf;
  }
  return out;
}

}  // namespace mcdrop::golden
