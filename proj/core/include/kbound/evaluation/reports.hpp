#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "kbound/evaluation/prompts.hpp"
#include "kbound/evaluation/quadrants.hpp"

namespace kbound::evaluation {

/// Quadrant counts and rates. Every rate is normalized by `total`.
struct EvalReport {
  std::array<std::size_t, kBucketCount> counts{};
  std::size_t total = 0;
  std::size_t known = 0;
  std::size_t unknown = 0;
  double rho_ik = 0.0;
  double rho_idk = 0.0;
  double truthful = 0.0;
  double tax = 0.0;
  double hallucination = 0.0;
  double wrong_on_known = 0.0;
  std::string setting;
  std::string model;
  std::string dataset;

  std::size_t count(Bucket b) const { return counts[static_cast<std::size_t>(b)]; }
};

struct ReportLabels {
  std::string setting;
  std::string model;
  std::string dataset;
};

/// Throws EmptyEvaluation on empty input.
EvalReport compute_metrics(const std::vector<QuadrantOutcome>& outcomes, const ReportLabels& labels = {});

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

/// Markdown table of counts and rates. With `fold_wrong_on_known`, the fifth
/// bucket is merged into IDK-IDK to show the four-quadrant view.
std::string report_markdown(const EvalReport& r, bool fold_wrong_on_known = false);

/// Fraction of responses detected as refusals. Empty input yields 0.
double refusal_rate_ood(const std::vector<std::string>& responses, const pairgen::RefusalTemplate& tmpl,
                        const VerifyOptions& options = {}, gateway::ModelClient* judge = nullptr);

/// Outcomes for intrinsically unanswerable queries: every sample is Unknown
/// and only abstention is honest, so correctness is never tested.
std::vector<QuadrantOutcome> classify_ood(const std::vector<Sample>& samples,
                                          const std::vector<std::string>& responses,
                                          const pairgen::RefusalTemplate& tmpl,
                                          const VerifyOptions& options = {},
                                          gateway::ModelClient* judge = nullptr);

struct MetricDelta {
  std::string metric;
  double base_pct = 0.0;
  double aligned_pct = 0.0;
  double delta_pp = 0.0;

  /// "+12.4↑", "-11.4↓" or "0.0" at one decimal.
  std::string formatted_delta() const;
};

struct DeltaTable {
  std::string setting;
  std::string base_model;
  std::string aligned_model;
  std::vector<MetricDelta> rows;

  const MetricDelta& at(std::string_view metric) const;
  /// Method | IK-IK | IK-IDK | Truthful, with aligned cells carrying deltas.
  std::string markdown() const;
  nlohmann::json to_json() const;
};

/// Throws IncomparableReports when |D| or setting differ.
DeltaTable compare_reports(const EvalReport& base, const EvalReport& aligned);

enum class ChartGrouping { kByMethod, kByDataset };

/// CSV `method,dataset,truthful` with truthful in percent. Throws
/// InvalidArgument on an empty list.
std::string render_chart_data(const std::vector<EvalReport>& reports, ChartGrouping grouping = ChartGrouping::kByMethod);

struct EvaluationRun {
  std::vector<QuadrantOutcome> outcomes;
  EvalReport report;
};

/// Greedy-answers every sample under `setting` and classifies the responses.
/// Non-OOD modes need a probe record per sample (MissingMastery otherwise).
EvaluationRun evaluate_corpus(const std::vector<Sample>& samples,
                              const std::vector<probing::ProbeRecord>& probe_records,
                              gateway::ModelClient& model, const EvalSetting& setting,
                              const pairgen::RefusalTemplate& tmpl, const VerifyOptions& options = {},
                              gateway::ModelClient* judge = nullptr, const std::string& dataset = {});

}  // namespace kbound::evaluation
