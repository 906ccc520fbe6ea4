#pragma once

#include <memory>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "kbound/gateway/client.hpp"

namespace kbound::gateway {

/// Test-double judge: replies are chosen by the first rule whose substrings
/// all occur in the prompt, else `default_reply`. Sampling behaves like
/// greedy; scoring is unsupported.
class ScriptedJudge final : public ModelClient {
 public:
  struct Rule {
    std::vector<std::string> contains;
    std::string reply;
  };
  using Responder = std::function<std::string(const Query&)>;

  ScriptedJudge(ModelEndpoint endpoint, std::vector<Rule> rules, std::string default_reply);
  ScriptedJudge(ModelEndpoint endpoint, Responder responder);

  /// Script file: {"rules": [{"contains": str | [str], "reply": str}], "default": str}.
  static std::unique_ptr<ScriptedJudge> load(ModelEndpoint endpoint, const std::filesystem::path& path);

  const ModelEndpoint& endpoint() const override { return endpoint_; }
  SampledResponse draw(const Query& query, double temperature, std::uint64_t seed,
                       int sample_index) override;
  SampledResponse greedy(const Query& query) override;
  ScoredSequence score(const Query& query, std::string_view target) override;

 private:
  ModelEndpoint endpoint_;
  Responder responder_;
};

}  // namespace kbound::gateway
