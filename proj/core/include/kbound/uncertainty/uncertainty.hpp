/// @file uncertainty.hpp
/// @brief Forced-sequence scoring of answers and the refusal template.
///
/// A target text is scored under the model given the bare question; the mean
/// per-token logprob uses the scoring endpoint's own token boundaries and
/// PPL = exp(-mean).

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kbound/curation/sample.hpp"
#include "kbound/gateway/client.hpp"
#include "kbound/pairgen/pairgen.hpp"
#include "kbound/probing/probing.hpp"

namespace kbound::uncertainty {

enum class TargetKind { kAnswer, kRefusalTemplate };
inline constexpr TargetKind kAllTargetKinds[] = {TargetKind::kAnswer, TargetKind::kRefusalTemplate};
std::string_view to_string(TargetKind k);
TargetKind target_kind_from_string(std::string_view s);

struct UncertaintyRecord {
  std::string sample_id;
  Mastery category = Mastery::kUnknown;
  TargetKind target_kind = TargetKind::kRefusalTemplate;
  double mean_token_logprob = 0.0;
  double ppl = 1.0;

  bool operator==(const UncertaintyRecord&) const = default;
};

nlohmann::json to_json(const UncertaintyRecord& r);
UncertaintyRecord uncertainty_record_from_json(const nlohmann::json& j);
std::vector<UncertaintyRecord> load_uncertainty_records(const std::filesystem::path& path);
void save_uncertainty_records(const std::filesystem::path& path, const std::vector<UncertaintyRecord>& records);

/// exp(-mean_logprob). Throws InvalidArgument on a positive or non-finite input.
double ppl_from_mean_logprob(double mean_logprob);

/// Mean per-token logprob of a scored sequence. Throws NumericalFailure when
/// the endpoint returned no tokens.
double mean_token_logprob(const gateway::ScoredSequence& scored);

/// Scores `target_text` after the sample's bare question. ScoringUnsupported
/// propagates from the client.
UncertaintyRecord forced_stats(const Sample& sample, gateway::ModelClient& model, std::string_view target_text,
                               Mastery category, TargetKind kind);

struct ProbeTargets {
  bool answer = true;
  bool refusal = true;
};

/// Forced stats for every sample and selected target kind, ordered by sample
/// then kind. The answer target is the ground truth; the refusal target is
/// the template's canonical string.
std::vector<UncertaintyRecord> probe_uncertainty(const std::vector<Sample>& samples,
                                                 const std::vector<probing::ProbeRecord>& probe_records,
                                                 gateway::ModelClient& model, const pairgen::RefusalTemplate& tmpl,
                                                 ProbeTargets targets = {});

/// Largest |ppl - exp(-mean)| over the records; 0 when empty.
double max_identity_deviation(const std::vector<UncertaintyRecord>& records);

struct SummaryCell {
  double mean_logprob = 0.0;
  double mean_ppl = 0.0;
  std::size_t count = 0;

  bool operator==(const SummaryCell&) const = default;
};

struct UncertaintySummary {
  std::map<std::pair<Mastery, TargetKind>, SummaryCell> cells;

  const SummaryCell* find(Mastery m, TargetKind k) const;
  std::size_t count(Mastery m) const;
  nlohmann::json to_json() const;
  static UncertaintySummary from_json(const nlohmann::json& j);
  /// One row per category present, one column group per target kind present.
  std::string markdown() const;
};

/// Groups by the probed mastery of each record's sample (MissingMastery when
/// absent) and target kind.
UncertaintySummary summarize(const std::vector<UncertaintyRecord>& records,
                             const std::vector<probing::ProbeRecord>& probe_records);

struct CellDelta {
  Mastery category = Mastery::kUnknown;
  TargetKind target_kind = TargetKind::kRefusalTemplate;
  SummaryCell pre;
  SummaryCell post;

  double logprob_delta() const { return post.mean_logprob - pre.mean_logprob; }
  double ppl_delta() const { return post.mean_ppl - pre.mean_ppl; }
};

struct UncertaintyComparison {
  std::vector<CellDelta> cells;

  const CellDelta& at(Mastery m, TargetKind k) const;
  /// Category | Logprob pre/post | PPL pre/post, one table per target kind.
  std::string markdown() const;
  nlohmann::json to_json() const;
};

/// Cells present in both summaries, in (category, kind) order.
UncertaintyComparison compare(const UncertaintySummary& pre, const UncertaintySummary& post);

}  // namespace kbound::uncertainty
