/// @file curation.hpp
/// @brief Visual-semantic sample selection with a VLM judge.
///
/// A sample is kept only when the judge finds the image clear, the answer
/// precise and the question knowledge-intensive. Unparseable judgements fail
/// closed: after one reprompt the sample is rejected.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kbound/curation/sample.hpp"
#include "kbound/gateway/client.hpp"

namespace kbound::curation {

struct CurationVerdict {
  std::string sample_id;
  bool visual_clear = false;
  bool answer_precise = false;
  bool knowledge_intensive = false;
  std::string rationale;
  bool kept = false;
  /// Judge output could not be parsed even after the reprompt.
  bool parse_failure = false;

  bool operator==(const CurationVerdict&) const = default;
};

nlohmann::json to_json(const CurationVerdict& v);
CurationVerdict verdict_from_json(const nlohmann::json& j);

/// Rubric prompt with `{question}` and `{answer}` placeholders.
struct Rubric {
  std::string prompt;
  std::string reprompt_suffix;

  static Rubric standard();
  std::string render(const Sample& s) const;
};

struct ParsedJudgement {
  bool visual_clear;
  bool answer_precise;
  bool knowledge_intensive;
  std::string rationale;
};

/// Parses the strict `KEY: YES|NO` reply; nullopt unless each of the three
/// criteria appears exactly once.
std::optional<ParsedJudgement> parse_judgement(std::string_view reply);

CurationVerdict curate_sample(const Sample& sample, gateway::ModelClient& judge,
                              const Rubric& rubric = Rubric::standard());

struct CurationOptions {
  Rubric rubric = Rubric::standard();
  /// Accept every sample without calling a judge.
  bool passthrough = false;
  std::optional<std::filesystem::path> verdict_sidecar;
};

struct CurationResult {
  std::vector<Sample> kept;
  std::vector<CurationVerdict> verdicts;
};

/// Order-preserving filter. On RemoteUnavailable the verdicts completed so far
/// are written to the sidecar and their ids are attached to the rethrown error.
CurationResult curate_corpus(const std::vector<Sample>& samples, gateway::ModelClient* judge,
                             const CurationOptions& options = {});

/// `<corpus>.verdicts.jsonl` next to the corpus file.
std::filesystem::path verdict_sidecar_for(const std::filesystem::path& corpus);

}  // namespace kbound::curation
