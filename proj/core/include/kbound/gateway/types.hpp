/// @file types.hpp
/// @brief Value types exchanged with generative model endpoints.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kbound::gateway {

enum class EndpointKind { kRemote, kMock };

struct ModelEndpoint {
  std::string name;
  EndpointKind kind = EndpointKind::kMock;
  /// Remote only, e.g. "http://localhost:8000/v1".
  std::string base_url;
  /// Model identifier sent in remote requests; defaults to `name` when empty.
  std::string model;
  /// Environment variable holding a bearer token, if any.
  std::string auth_token_env;
  double request_timeout_s = 60.0;
  int max_parallel = 1;
  int max_tokens = 64;
  /// Remote endpoints must opt in to forced-decoding scoring.
  bool supports_scoring = false;
  /// Mock only: knowledge-map file or judge script.
  std::string mock_source;

  /// Throws ConfigurationError if an invariant is violated.
  void validate() const;
};

/// One generation. Log-probabilities are natural-log and may be absent when a
/// remote endpoint does not return them.
struct SampledResponse {
  std::string text;
  std::optional<double> total_logprob;
  std::optional<std::vector<double>> token_logprobs;
  int sample_index = 0;

  bool operator==(const SampledResponse&) const = default;
};

struct ScoredSequence {
  std::vector<double> token_logprobs;
  double total_logprob = 0.0;

  bool operator==(const ScoredSequence&) const = default;
};

/// What a model is asked. `sample_id` lets test doubles look the item up; it
/// is never sent to a remote endpoint.
struct Query {
  std::string sample_id;
  std::string prompt;
  std::string image_ref;
};

enum class DecodeMode { kSample, kGreedy, kScore };

nlohmann::json to_json(const SampledResponse& r);
SampledResponse sampled_response_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScoredSequence& s);
ScoredSequence scored_sequence_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelEndpoint& e);
ModelEndpoint endpoint_from_json(const nlohmann::json& j);

}  // namespace kbound::gateway
