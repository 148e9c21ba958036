// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace gapfinder {

/// 64-bit FNV-1a. Used to derive PRNG stream selectors from string keys.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

/// PCG-XSH-RR with 64-bit state and 32-bit output (O'Neill, 2014).
///
/// Seeding follows the reference `pcg32_srandom_r(initstate, initseq)`:
///   state = 0; inc = (initseq << 1) | 1; step(); state += initstate; step();
/// Each step is `state = state * 6364136223846793005 + inc`, and the output of
/// the old state is `rotr32(((old >> 18) ^ old) >> 27, old >> 59)`.
///
/// Every sampling helper below is defined in terms of `next()` so that other
/// implementations can replay a stream exactly:
///   - `bounded(n)`: draw r until r >= (2^32 - n) % n, return r % n.
///   - `uniform()`:  a = next() >> 5, b = next() >> 6, (a * 2^26 + b) / 2^53.
class Pcg32 {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;

  constexpr Pcg32(std::uint64_t seed, std::uint64_t stream) noexcept : inc_((stream << 1U) | 1U) {
    next();
    state_ += seed;
    next();
  }

  /// Independent stream for a (seed, key) pair, e.g. (config seed, example id).
  static constexpr Pcg32 for_key(std::uint64_t seed, std::string_view key) noexcept {
    return Pcg32(seed, fnv1a64(key));
  }

  constexpr std::uint32_t next() noexcept {
    const std::uint64_t old = state_;
    state_ = old * kMultiplier + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18U) ^ old) >> 27U);
    const auto rot = static_cast<std::uint32_t>(old >> 59U);
    return (xorshifted >> rot) | (xorshifted << ((32U - rot) & 31U));
  }

  /// Uniform integer in [0, bound). `bound` must be positive.
  constexpr std::uint32_t bounded(std::uint32_t bound) noexcept {
    const std::uint32_t threshold = (0U - bound) % bound;
    for (;;) {
      const std::uint32_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  /// Uniform double in [0, 1) with 53 bits of resolution.
  constexpr double uniform() noexcept {
    const std::uint64_t a = next() >> 5U;
    const std::uint64_t b = next() >> 6U;
    return static_cast<double>(a * 67108864ULL + b) / 9007199254740992.0;
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_;
};

/// Fisher-Yates from the back: for i = n-1 down to 1, swap(i, bounded(i + 1)).
template <typename T>
void shuffle(std::span<T> items, Pcg32& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.bounded(static_cast<std::uint32_t>(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace gapfinder
