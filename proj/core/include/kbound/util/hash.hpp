#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace kbound::util {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// First 8 bytes of SHA-256, big-endian. Stable across platforms and runs,
/// unlike std::hash.
std::uint64_t stable_hash64(std::string_view data);

}  // namespace kbound::util
