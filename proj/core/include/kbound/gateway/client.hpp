/// @file client.hpp
/// @brief Uniform access to a vision-language model for sampling, greedy
/// answering, judging and forced-decoding scoring.

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "kbound/gateway/types.hpp"

namespace kbound::gateway {

class ModelClient {
 public:
  virtual ~ModelClient() = default;

  virtual const ModelEndpoint& endpoint() const = 0;

  /// One stochastic draw. Implementations must be pure in
  /// (query, temperature, seed, sample_index).
  virtual SampledResponse draw(const Query& query, double temperature, std::uint64_t seed,
                               int sample_index) = 0;

  /// Temperature-0 decoding.
  virtual SampledResponse greedy(const Query& query) = 0;

  /// Forced decoding of `target`; one log-probability per target token.
  virtual ScoredSequence score(const Query& query, std::string_view target) = 0;

  /// Number of calls that reached the underlying model (cache hits excluded).
  std::uint64_t backend_calls() const { return backend_calls_.load(); }

 protected:
  void count_call() { backend_calls_.fetch_add(1); }

 private:
  std::atomic<std::uint64_t> backend_calls_{0};
};

/// Draws `n` responses concurrently (up to the endpoint's max_parallel) and
/// returns them ordered by sample_index.
std::vector<SampledResponse> sample_responses(ModelClient& client, const Query& query, int n,
                                              double temperature, std::uint64_t seed);

SampledResponse greedy_answer(ModelClient& client, const Query& query);

ScoredSequence score_sequence(ModelClient& client, const Query& query, std::string_view target);

}  // namespace kbound::gateway
