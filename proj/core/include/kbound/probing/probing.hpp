/// @file probing.hpp
/// @brief Multi-sample consistency probing.
///
/// Each sample is answered `n` times at a high temperature; the fraction of
/// correct draws is the sample's mastery, and a sample is Known iff that
/// fraction reaches the threshold tau (ties count as Known).

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kbound/curation/sample.hpp"
#include "kbound/gateway/client.hpp"
#include "kbound/probing/matching.hpp"

namespace kbound {

enum class Mastery { kKnown, kUnknown };
std::string_view to_string(Mastery m);
Mastery mastery_from_string(std::string_view s);

}  // namespace kbound

namespace kbound::probing {

struct ProbeResponse {
  gateway::SampledResponse response;
  bool correct = false;

  bool operator==(const ProbeResponse&) const = default;
};

struct ProbeRecord {
  std::string sample_id;
  std::vector<ProbeResponse> responses;
  double accuracy = 0.0;
  Mastery label = Mastery::kUnknown;
  int n = 0;
  double temperature = 0.0;
  double tau = 0.0;
  std::string model;
  std::string prompt_template_hash;

  int correct_count() const;
  bool operator==(const ProbeRecord&) const = default;
};

nlohmann::json to_json(const ProbeRecord& r);
ProbeRecord probe_record_from_json(const nlohmann::json& j);
std::vector<ProbeRecord> load_probe_records(const std::filesystem::path& path);
void save_probe_records(const std::filesystem::path& path, const std::vector<ProbeRecord>& records);

struct ProbeParams {
  int n = 10;
  double temperature = 1.0;
  double tau = 0.7;
  std::uint64_t seed = 0;
  MatchPolicy policy;

  void validate() const;
};

/// Known iff correct/n >= tau. Computed on counts so A = tau is never lost to
/// rounding.
Mastery label_for(int correct, int n, double tau);

/// Template used for probing prompts: the bare question.
inline constexpr std::string_view kProbePromptTemplate = "{question}";
std::string probe_prompt_template_hash();

ProbeRecord probe_sample(const Sample& sample, gateway::ModelClient& model, const ProbeParams& params,
                         gateway::ModelClient* judge = nullptr);

/// Probes every sample, output in input order. With a checkpoint path, each
/// finished record is appended there immediately and records already present
/// (with matching n, tau, temperature and model) are reused.
std::vector<ProbeRecord> probe_corpus(const std::vector<Sample>& samples, gateway::ModelClient& model,
                                      const ProbeParams& params, gateway::ModelClient* judge = nullptr,
                                      const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

struct ProbeSummary {
  std::size_t total = 0;
  std::size_t known = 0;
  std::size_t unknown = 0;
  /// 0 for an empty corpus.
  double known_fraction = 0.0;
  std::map<double, std::size_t> accuracy_histogram;
};

ProbeSummary summarize_probes(const std::vector<ProbeRecord>& records);
nlohmann::json to_json(const ProbeSummary& s);

std::filesystem::path probe_output_for(const std::filesystem::path& corpus);

}  // namespace kbound::probing
