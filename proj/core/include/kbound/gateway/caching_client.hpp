#pragma once

#include <memory>

#include "kbound/gateway/client.hpp"
#include "kbound/gateway/response_cache.hpp"

namespace kbound::gateway {

/// Decorator that serves repeated requests from a ResponseCache. Only misses
/// reach the inner client, so `inner().backend_calls()` counts real calls.
class CachingClient final : public ModelClient {
 public:
  CachingClient(std::shared_ptr<ModelClient> inner, std::shared_ptr<ResponseCache> cache);

  const ModelEndpoint& endpoint() const override { return inner_->endpoint(); }
  SampledResponse draw(const Query& query, double temperature, std::uint64_t seed,
                       int sample_index) override;
  SampledResponse greedy(const Query& query) override;
  ScoredSequence score(const Query& query, std::string_view target) override;

  ModelClient& inner() { return *inner_; }

 private:
  std::shared_ptr<ModelClient> inner_;
  std::shared_ptr<ResponseCache> cache_;
};

/// Builds the client described by `endpoint` (mock knowledge map, scripted
/// judge, or remote), wrapped in a cache when one is given.
std::shared_ptr<ModelClient> make_client(const ModelEndpoint& endpoint,
                                         std::shared_ptr<ResponseCache> cache = nullptr);

}  // namespace kbound::gateway
