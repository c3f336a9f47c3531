// Copyright 2026 The Footfall Authors
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

#pragma once

// Counter-based random numbers: every value is a pure function of
// (key, counter), so noise streams are identical across platforms, thread
// counts and evaluation order.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace footfall {

constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t stream) noexcept {
  return mix64(key ^ mix64(stream + 0x632BE59BD9B4E019ull));
}

class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  static constexpr std::uint64_t at(std::uint64_t key, std::uint64_t counter) noexcept {
    return mix64(key ^ mix64(counter));
  }

  // Uniform on [0, 1) with 53 random bits.
  static constexpr double unit_at(std::uint64_t key, std::uint64_t counter) noexcept {
    return static_cast<double>(at(key, counter) >> 11) * 0x1.0p-53;
  }

  // Uniform on [-1, 1).
  static constexpr double symmetric_at(std::uint64_t key, std::uint64_t counter) noexcept {
    return 2.0 * unit_at(key, counter) - 1.0;
  }

  constexpr std::uint64_t next_u64() noexcept { return at(key_, counter_++); }
  constexpr double uniform() noexcept { return unit_at(key_, counter_++); }
  constexpr double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  constexpr double symmetric() noexcept { return symmetric_at(key_, counter_++); }

  // Unbiased integer in [0, n) by rejection.
  constexpr std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  // Standard normal via Box-Muller; consumes two counters.
  double normal() noexcept {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace footfall

