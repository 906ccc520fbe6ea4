/// @file rng.hpp
/// @brief Portable seeded draws.
///
/// The standard distributions are implementation-defined, so anything whose
/// output is pinned by golden tests draws through these helpers instead.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace kbound::util {

/// Seed for an independent stream identified by (seed, key, index).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key, std::uint64_t index);

/// Uniform double in [0, 1) built from the top 53 bits of one engine output.
inline double canonical(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) by rejection sampling; bound > 0.
std::uint64_t bounded(std::mt19937_64& engine, std::uint64_t bound);

/// Fisher-Yates shuffle driven by `bounded`.
template <typename RandomIt>
void portable_shuffle(RandomIt first, RandomIt last, std::mt19937_64& engine) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = bounded(engine, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace kbound::util
