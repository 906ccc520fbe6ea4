/// @file mock_model.hpp
/// @brief Deterministic stand-in for a generative model.
///
/// Each sample id maps to a categorical distribution over whole answers: the
/// correct answer with probability `correct_prob`, and wrong answers sharing
/// the remaining mass in proportion to their weights. Responses are tokenized
/// on whitespace and a response's log-probability is split evenly over its
/// tokens. Targets outside the distribution score `kUnlistedTokenLogprob` per
/// token.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kbound/gateway/client.hpp"

namespace kbound::gateway {

inline constexpr double kUnlistedTokenLogprob = -10.0;

struct MockEntry {
  std::string correct_answer;
  double correct_prob = 1.0;
  std::vector<std::pair<std::string, double>> wrong_answers;
};

class MockKnowledgeMap {
 public:
  MockKnowledgeMap() = default;

  /// Validates the entry; throws InvalidArgument on bad probabilities or a
  /// duplicate id.
  void add(const std::string& sample_id, MockEntry entry);

  const MockEntry* find(const std::string& sample_id) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, MockEntry>& entries() const { return entries_; }

  /// Normalized (answer, probability) list, correct answer first.
  static std::vector<std::pair<std::string, double>> distribution(const MockEntry& entry);

  static MockKnowledgeMap from_json(const nlohmann::json& j);
  static MockKnowledgeMap load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

 private:
  std::map<std::string, MockEntry> entries_;
};

class MockModel final : public ModelClient {
 public:
  MockModel(ModelEndpoint endpoint, MockKnowledgeMap map);

  const ModelEndpoint& endpoint() const override { return endpoint_; }
  SampledResponse draw(const Query& query, double temperature, std::uint64_t seed,
                       int sample_index) override;
  SampledResponse greedy(const Query& query) override;
  ScoredSequence score(const Query& query, std::string_view target) override;

  const MockKnowledgeMap& knowledge() const { return map_; }

 private:
  const MockEntry& lookup(const std::string& sample_id) const;

  ModelEndpoint endpoint_;
  MockKnowledgeMap map_;
};

/// Splits `total` evenly over the whitespace tokens of `text`.
std::vector<double> spread_logprob(std::string_view text, double total);

}  // namespace kbound::gateway
