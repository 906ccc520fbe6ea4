#include "kbound/gateway/types.hpp"

#include "kbound/errors.hpp"

namespace kbound::gateway {

using nlohmann::json;

void ModelEndpoint::validate() const {
  if (name.empty()) throw ConfigurationError("endpoint name is empty");
  if (max_parallel < 1) throw ConfigurationError("endpoint " + name + ": max_parallel must be >= 1");
  if (request_timeout_s <= 0) throw ConfigurationError("endpoint " + name + ": request_timeout must be > 0");
  if (kind == EndpointKind::kRemote && base_url.empty()) {
    throw ConfigurationError("remote endpoint " + name + " has no base_url");
  }
  if (kind == EndpointKind::kMock && mock_source.empty()) {
    throw ConfigurationError("mock endpoint " + name + " has no mock_source");
  }
}

json to_json(const SampledResponse& r) {
  json j;
  j["text"] = r.text;
  j["total_logprob"] = r.total_logprob ? json(*r.total_logprob) : json(nullptr);
  j["token_logprobs"] = r.token_logprobs ? json(*r.token_logprobs) : json(nullptr);
  j["sample_index"] = r.sample_index;
  return j;
}

SampledResponse sampled_response_from_json(const json& j) {
  SampledResponse r;
  r.text = j.at("text").get<std::string>();
  if (j.contains("total_logprob") && !j["total_logprob"].is_null()) {
    r.total_logprob = j["total_logprob"].get<double>();
  }
  if (j.contains("token_logprobs") && !j["token_logprobs"].is_null()) {
    r.token_logprobs = j["token_logprobs"].get<std::vector<double>>();
  }
  r.sample_index = j.value("sample_index", 0);
  return r;
}

json to_json(const ScoredSequence& s) {
  return {{"token_logprobs", s.token_logprobs}, {"total_logprob", s.total_logprob}};
}

ScoredSequence scored_sequence_from_json(const json& j) {
  ScoredSequence s;
  s.token_logprobs = j.at("token_logprobs").get<std::vector<double>>();
  s.total_logprob = j.at("total_logprob").get<double>();
  return s;
}

json to_json(const ModelEndpoint& e) {
  return {{"name", e.name},
          {"kind", e.kind == EndpointKind::kRemote ? "remote" : "mock"},
          {"base_url", e.base_url},
          {"model", e.model},
          {"auth_token_env", e.auth_token_env},
          {"request_timeout", e.request_timeout_s},
          {"max_parallel", e.max_parallel},
          {"max_tokens", e.max_tokens},
          {"supports_scoring", e.supports_scoring},
          {"mock_source", e.mock_source}};
}

ModelEndpoint endpoint_from_json(const json& j) {
  ModelEndpoint e;
  e.name = j.value("name", "");
  const std::string kind = j.value("kind", "mock");
  if (kind == "remote") {
    e.kind = EndpointKind::kRemote;
  } else if (kind == "mock") {
    e.kind = EndpointKind::kMock;
  } else {
    throw ConfigurationError("unknown endpoint kind: " + kind);
  }
  e.base_url = j.value("base_url", "");
  e.model = j.value("model", "");
  e.auth_token_env = j.value("auth_token_env", "");
  e.request_timeout_s = j.value("request_timeout", 60.0);
  e.max_parallel = j.value("max_parallel", 1);
  e.max_tokens = j.value("max_tokens", 64);
  e.supports_scoring = j.value("supports_scoring", false);
  e.mock_source = j.value("mock_source", "");
  return e;
}

}  // namespace kbound::gateway
