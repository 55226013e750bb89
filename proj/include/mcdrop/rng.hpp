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

// Counter-based random numbers.
//
// All randomness in mcdrop is drawn from Philox4x32-10 (Salmon et al., "Parallel
// random numbers: as easy as 1, 2, 3", SC'11). A draw is a pure function of a
// 64-bit key (the user seed) and a 128-bit counter, so masks, batches and
// permutations can be regenerated in any order, on any thread, on any platform.
//
// Counter layout used throughout: {block, a, b, stream}, where `stream` names
// the consumer (test dropout, training batches, ...) and (a, b) are its
// coordinates, e.g. (pass index, layer index) for dropout masks. Consecutive
// 32-bit words of one (stream, a, b) tuple form an unbounded sequence.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mcdrop {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

inline PhiloxKey philox_key(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

// Consumers of random numbers. Each one draws from a disjoint counter range.
enum class Stream : std::uint32_t {
  TestDropout = 1,
  TrainDropout = 2,
  TrainBatch = 3,
  Init = 4,
  Data = 5,
  Augment = 6,
  Permutation = 7,
  Bench = 8,
};

// SplitMix64 finalizer; derives child seeds, e.g. one per test sample.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Uniform in (0, 1) from one 32-bit word. Never returns 0 or 1.
inline double unit_from_u32(std::uint32_t w) {
  return (static_cast<double>(w) + 0.5) * 0x1p-32;
}

// Uniform in (0, 1) with 53 random bits.
inline double unit_from_u64(std::uint64_t w) {
  return (static_cast<double>(w >> 11) + 0.5) * 0x1p-53;
}

// Sequential view over the words of one (seed, stream, a, b) tuple.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, Stream stream, std::uint32_t a = 0,
                std::uint32_t b = 0)
      : key_(philox_key(seed)), a_(a), b_(b), stream_(static_cast<std::uint32_t>(stream)) {}

  // Word number `index` of the sequence, independent of stream position.
  std::uint32_t word_at(std::uint64_t index) const {
    const auto out = philox4x32(
        {static_cast<std::uint32_t>(index / 4), a_, b_, stream_}, key_);
    return out[index % 4];
  }

  std::uint32_t next_u32() {
    if (used_ == 4) {
      buffer_ = philox4x32({block_++, a_, b_, stream_}, key_);
      used_ = 0;
    }
    return buffer_[used_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  double uniform() { return unit_from_u64(next_u64()); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Multiply-shift on 64 bits; the bias is below
  // n / 2^64 and irrelevant here.
  std::uint64_t index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; the second variate is kept for the next call.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

 private:
  PhiloxKey key_;
  std::uint32_t a_;
  std::uint32_t b_;
  std::uint32_t stream_;
  std::uint32_t block_ = 0;
  PhiloxCounter buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mcdrop
