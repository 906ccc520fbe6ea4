/// @file remote_client.hpp
/// @brief Chat-completions HTTP client.
///
/// Generation posts `{model, messages, temperature, max_tokens, seed,
/// logprobs}` to `<base_url>/chat/completions` with the image attached as an
/// `image_url` content part (URLs pass through; local files are inlined as
/// base64 data URLs). Scoring sends the target as a trailing assistant
/// message with `echo: true, max_tokens: 0` and reads the echoed token
/// log-probabilities from `choices[0].logprobs.content`.

#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json.hpp>

#include "kbound/gateway/client.hpp"

namespace kbound::gateway {

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
};

class RemoteClient final : public ModelClient {
 public:
  explicit RemoteClient(ModelEndpoint endpoint, RetryPolicy retry = {});

  const ModelEndpoint& endpoint() const override { return endpoint_; }
  SampledResponse draw(const Query& query, double temperature, std::uint64_t seed,
                       int sample_index) override;
  SampledResponse greedy(const Query& query) override;
  ScoredSequence score(const Query& query, std::string_view target) override;

  /// Request body for a generation call; exposed for wire-format tests.
  nlohmann::json generation_request(const Query& query, double temperature,
                                    std::uint64_t seed) const;
  nlohmann::json scoring_request(const Query& query, std::string_view target) const;

 private:
  nlohmann::json post(const nlohmann::json& body);
  nlohmann::json user_message(const Query& query) const;

  ModelEndpoint endpoint_;
  RetryPolicy retry_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

/// `data:<mime>;base64,...` for a local image file. Throws InvalidRequest if
/// the file cannot be read.
std::string image_data_url(const std::string& path);

}  // namespace kbound::gateway
