/// @file config.hpp
/// @brief Pipeline configuration: one JSON file, `${VAR}` interpolation,
/// dotted-path overrides.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kbound/curation/curation.hpp"
#include "kbound/evaluation/prompts.hpp"
#include "kbound/evaluation/quadrants.hpp"
#include "kbound/gateway/types.hpp"
#include "kbound/losses/objectives.hpp"
#include "kbound/pairgen/pairgen.hpp"
#include "kbound/probing/probing.hpp"

namespace kbound::pipeline {

struct SplitParams {
  std::size_t train = 20000;
  std::size_t test = 3000;
  double known_fraction = 0.6;
};

struct ToyTrainParams {
  losses::Objective objective = losses::Objective::kOrpo;
  int steps = 200;
  double lr = 0.5;
  std::size_t dim = 16;
  /// Distractor responses per prompt besides chosen and rejected.
  std::size_t distractors = 2;
};

struct PathParams {
  std::filesystem::path corpus;
  std::filesystem::path out_dir = "out";
  std::filesystem::path cache_dir = ".kbound-cache";
};

struct PipelineConfig {
  gateway::ModelEndpoint model;
  std::optional<gateway::ModelEndpoint> reference;
  std::optional<gateway::ModelEndpoint> judge;

  curation::Rubric rubric = curation::Rubric::standard();
  bool curation_passthrough = false;
  probing::ProbeParams probing;
  evaluation::VerifyOptions verify;
  pairgen::PairOptions pairs;
  pairgen::RefusalTemplate refusal;
  SplitParams split;
  losses::Hyperparams hyperparams;
  ToyTrainParams training;
  evaluation::EvalSetting evaluation;
  PathParams paths;
  std::uint64_t seed = 0;

  /// Raw document after overrides, before interpolation. Safe to write out:
  /// secrets stay as `${VAR}` references.
  nlohmann::json effective;
  /// SHA-256 of the interpolated document in canonical form.
  std::string hash;

  /// Throws ConfigurationError on out-of-range values.
  void validate() const;
};

/// Replaces `${NAME}` in every string value from the environment; an unset
/// variable throws ConfigurationError.
nlohmann::json interpolate_env(const nlohmann::json& doc);

/// Sets `dotted.path` in `doc`. `value` is parsed as JSON when it parses,
/// otherwise stored as a string.
void apply_override(nlohmann::json& doc, std::string_view dotted_path, std::string_view value);

/// Builds a validated config. Relative paths are resolved against `base_dir`.
PipelineConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");

PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::string>>& overrides = {});

}  // namespace kbound::pipeline
