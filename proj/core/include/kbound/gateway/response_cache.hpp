#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "kbound/gateway/types.hpp"

namespace kbound::gateway {

struct CacheKey {
  std::string endpoint;
  std::string sample_id;
  std::string prompt_hash;
  std::string image_hash;
  std::string target_hash;  // scoring only
  double temperature = 0.0;
  int sample_index = 0;
  std::uint64_t seed = 0;
  DecodeMode mode = DecodeMode::kGreedy;

  static CacheKey make(const ModelEndpoint& endpoint, const Query& query, DecodeMode mode,
                       double temperature = 0.0, int sample_index = 0, std::uint64_t seed = 0,
                       std::string_view target = {});

  /// SHA-256 over the canonical serialization of every field.
  std::string digest() const;
};

/// Append-only on-disk store: `<dir>/responses.jsonl`, one
/// `{"key": digest, "value": ...}` per line. Safe for concurrent writers in
/// one process; each record is a single appended write.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<nlohmann::json> get(const std::string& digest) const;
  /// First write wins; later puts for an existing key are ignored.
  void put(const std::string& digest, const nlohmann::json& value);

  std::size_t size() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, nlohmann::json> entries_;
  std::ofstream log_;
};

}  // namespace kbound::gateway
