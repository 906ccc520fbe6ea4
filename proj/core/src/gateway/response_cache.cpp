#include "kbound/gateway/response_cache.hpp"

#include <sstream>

#include "kbound/errors.hpp"
#include "kbound/util/hash.hpp"
#include "kbound/util/jsonl.hpp"

namespace kbound::gateway {
namespace fs = std::filesystem;

namespace {

std::string_view mode_name(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::kSample: return "sample";
    case DecodeMode::kGreedy: return "greedy";
    case DecodeMode::kScore: return "score";
  }
  return "?";
}

}  // namespace

CacheKey CacheKey::make(const ModelEndpoint& endpoint, const Query& query, DecodeMode mode,
                        double temperature, int sample_index, std::uint64_t seed,
                        std::string_view target) {
  CacheKey k;
  k.endpoint = endpoint.name;
  k.sample_id = query.sample_id;
  k.prompt_hash = util::sha256_hex(query.prompt);
  k.image_hash = util::sha256_hex(query.image_ref);
  k.target_hash = target.empty() ? "" : util::sha256_hex(target);
  k.temperature = temperature;
  k.sample_index = sample_index;
  k.seed = seed;
  k.mode = mode;
  return k;
}

std::string CacheKey::digest() const {
  const nlohmann::json j = {{"endpoint", endpoint},       {"sample_id", sample_id},
                            {"prompt", prompt_hash},      {"image", image_hash},
                            {"target", target_hash},      {"temperature", temperature},
                            {"sample_index", sample_index}, {"seed", seed},
                            {"mode", mode_name(mode)}};
  return util::sha256_hex(util::canonical_dump(j));
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  const fs::path file = dir_ / "responses.jsonl";
  if (fs::exists(file)) {
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        auto rec = nlohmann::json::parse(line);
        entries_.try_emplace(rec.at("key").get<std::string>(), std::move(rec.at("value")));
      } catch (const nlohmann::json::exception&) {
        // A torn final line from an interrupted run; the request is simply redone.
      }
    }
  }
  log_.open(file, std::ios::app | std::ios::binary);
  if (!log_) throw IoError("cannot open cache log " + file.string());
}

std::optional<nlohmann::json> ResponseCache::get(const std::string& digest) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(digest);
  if (it == entries_.end()) return std::nullopt;
  return std::optional<nlohmann::json>(std::in_place, it->second);
}

void ResponseCache::put(const std::string& digest, const nlohmann::json& value) {
  const std::string line = nlohmann::json{{"key", digest}, {"value", value}}.dump() + "\n";
  std::lock_guard lock(mutex_);
  if (!entries_.try_emplace(digest, value).second) return;
  log_.write(line.data(), static_cast<std::streamsize>(line.size()));
  log_.flush();
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

}  // namespace kbound::gateway
