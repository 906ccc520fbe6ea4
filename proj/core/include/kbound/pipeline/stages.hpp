/// @file stages.hpp
/// @brief Corpus-level pipeline stages over a shared output directory.
///
/// Every stage reads its inputs from and writes its artifacts into
/// `config.paths.out_dir`, dumps the effective config, and writes one
/// manifest for the invocation.
///
///   curate       corpus -> curated.jsonl, curated.verdicts.jsonl
///   probe        curated.jsonl -> probe.jsonl
///   pairgen      curated + probe -> pairs.jsonl, train/test splits, train.sft.jsonl
///   losses-check random toy policies -> losses-check.json
///   toy-train    train.pairs.jsonl -> toy-train.<objective>.csv
///   evaluate     test split (or a given corpus) -> eval.<tag>.json/.md/.outcomes.jsonl
///   uncertainty  test split (or a given corpus) -> uncertainty.<tag>.jsonl/.summary.json/.md

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kbound/gateway/client.hpp"
#include "kbound/gateway/response_cache.hpp"
#include "kbound/pipeline/config.hpp"
#include "kbound/pipeline/manifest.hpp"

namespace kbound::pipeline {

struct StageInputs {
  /// Corpus to process instead of the stage's default input.
  std::optional<std::filesystem::path> corpus;
  /// Probe records to use instead of `probe.jsonl`.
  std::optional<std::filesystem::path> probe;
  /// Overrides the artifact tag for evaluate/uncertainty.
  std::optional<std::string> tag;
};

struct StageResult {
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  std::filesystem::path manifest;
  nlohmann::json summary;
  /// False when the stage ran but its check failed (losses-check).
  bool passed = true;
};

/// Clients and cache shared by the stages of one invocation.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }
  gateway::ModelClient& model();
  gateway::ModelClient* judge();

  StageResult curate(const StageInputs& in = {});
  StageResult probe(const StageInputs& in = {});
  StageResult pairgen(const StageInputs& in = {});
  StageResult losses_check(std::size_t policies = 20);
  StageResult toy_train(const StageInputs& in = {});
  StageResult evaluate(const StageInputs& in = {});
  StageResult uncertainty(const StageInputs& in = {});

  std::filesystem::path out(const std::string& name) const { return config_.paths.out_dir / name; }

 private:
  void finish(const std::string& command, const std::string& started, StageResult& result);
  std::vector<Sample> default_eval_samples(std::vector<std::filesystem::path>& inputs);
  std::string tag_for(const StageInputs& in) const;

  PipelineConfig config_;
  std::shared_ptr<gateway::ResponseCache> cache_;
  std::shared_ptr<gateway::ModelClient> model_;
  std::shared_ptr<gateway::ModelClient> judge_;
};

}  // namespace kbound::pipeline
