//
// Copyright 2026 The dpaccel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DPACCEL_RNG_HPP_
#define DPACCEL_RNG_HPP_

#include <cstddef>
#include <cstdint>

#include "dpaccel/errors.hpp"

namespace dpaccel {

// Counter-based generator. Draw k of a stream is SplitMix64's finalizer
// applied to seed + k * 0x9E3779B97F4A7C15, i.e. exactly the SplitMix64
// sequence started from `seed`. A (seed, counter) pair therefore pins every
// subsequent draw on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t NextU64() {
    ++counter_;
    return Mix(seed_ + counter_ * kGamma);
  }

  // Uniform on the open interval (0, 1); never returns 0 or 1.
  double Uniform01() {
    return (static_cast<double>(NextU64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }

  // Unbiased integer in [0, n) by rejection on the top of the range.
  std::uint64_t UniformIndex(std::uint64_t n) {
    internal::Require(n > 0, "UniformIndex: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t draw = NextU64();
    while (draw >= limit) draw = NextU64();
    return draw % n;
  }

  // Seed for the index-th independent stream under a base seed.
  static std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t index) {
    return Mix(base ^ Mix(index + kGamma));
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t Mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace dpaccel

#endif  // DPACCEL_RNG_HPP_
