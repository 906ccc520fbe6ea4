#include "kbound/util/rng.hpp"

#include <string>

#include "kbound/util/hash.hpp"

namespace kbound::util {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view key, std::uint64_t index) {
  std::string material = std::to_string(seed);
  material.push_back('\x1f');
  material.append(key);
  material.push_back('\x1f');
  material.append(std::to_string(index));
  return stable_hash64(material);
}

std::uint64_t bounded(std::mt19937_64& engine, std::uint64_t bound) {
  // Reject the tail that would bias the modulo.
  const std::uint64_t limit = std::mt19937_64::max() - (std::mt19937_64::max() % bound + 1) % bound;
  std::uint64_t x = engine();
  while (x > limit) x = engine();
  return x % bound;
}

}  // namespace kbound::util
