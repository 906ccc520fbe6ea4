#include "kbound/gateway/caching_client.hpp"

#include "kbound/errors.hpp"
#include "kbound/gateway/mock_model.hpp"
#include "kbound/gateway/remote_client.hpp"
#include "kbound/gateway/scripted_judge.hpp"
#include "kbound/util/jsonl.hpp"

namespace kbound::gateway {

CachingClient::CachingClient(std::shared_ptr<ModelClient> inner,
                             std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

SampledResponse CachingClient::draw(const Query& query, double temperature, std::uint64_t seed,
                                    int sample_index) {
  const auto key =
      CacheKey::make(endpoint(), query, DecodeMode::kSample, temperature, sample_index, seed).digest();
  if (auto hit = cache_->get(key)) return sampled_response_from_json(*hit);
  auto r = inner_->draw(query, temperature, seed, sample_index);
  cache_->put(key, to_json(r));
  return r;
}

SampledResponse CachingClient::greedy(const Query& query) {
  const auto key = CacheKey::make(endpoint(), query, DecodeMode::kGreedy).digest();
  if (auto hit = cache_->get(key)) return sampled_response_from_json(*hit);
  auto r = inner_->greedy(query);
  cache_->put(key, to_json(r));
  return r;
}

ScoredSequence CachingClient::score(const Query& query, std::string_view target) {
  const auto key = CacheKey::make(endpoint(), query, DecodeMode::kScore, 0.0, 0, 0, target).digest();
  if (auto hit = cache_->get(key)) return scored_sequence_from_json(*hit);
  auto s = inner_->score(query, target);
  cache_->put(key, to_json(s));
  return s;
}

std::shared_ptr<ModelClient> make_client(const ModelEndpoint& endpoint,
                                         std::shared_ptr<ResponseCache> cache) {
  endpoint.validate();
  std::shared_ptr<ModelClient> client;
  if (endpoint.kind == EndpointKind::kRemote) {
    client = std::make_shared<RemoteClient>(endpoint);
  } else {
    const auto source = util::read_json(endpoint.mock_source);
    if (source.contains("rules") || source.contains("default")) {
      client = ScriptedJudge::load(endpoint, endpoint.mock_source);
    } else {
      client = std::make_shared<MockModel>(endpoint, MockKnowledgeMap::from_json(source));
    }
  }
  if (cache) return std::make_shared<CachingClient>(std::move(client), std::move(cache));
  return client;
}

}  // namespace kbound::gateway
