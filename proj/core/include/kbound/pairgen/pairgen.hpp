/// @file pairgen.hpp
/// @brief Preference pairs and SFT targets from probe records.
///
/// Known samples prefer the model's own correct answer over a refusal;
/// Unknown samples prefer the refusal over the model's most confident wrong
/// answer.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "kbound/curation/sample.hpp"
#include "kbound/probing/probing.hpp"

namespace kbound::pairgen {

struct RefusalTemplate {
  std::string canonical = "I don't know.";
  std::string prompting_variant =
      "I'm sorry, this question is beyond my knowledge. I don't know the answer.";
  std::vector<std::string> detector_phrases = {"i don't know", "i do not know", "beyond my knowledge",
                                               "i'm not sure", "cannot answer"};

  /// Case-insensitive phrase containment; typographic apostrophes count as '.
  bool detects(std::string_view text) const;
  /// Throws ConfigurationError unless both template strings are detected.
  void validate() const;
};

nlohmann::json to_json(const RefusalTemplate& t);
RefusalTemplate refusal_template_from_json(const nlohmann::json& j);

enum class Branch { kKnown, kUnknown };
enum class ChosenSource { kModelCorrect, kGroundTruth, kRefusal };
enum class RejectedSource { kRefusal, kModelIncorrect };

std::string_view to_string(Branch b);
std::string_view to_string(ChosenSource s);
std::string_view to_string(RejectedSource s);

struct PreferencePair {
  std::string sample_id;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  Branch branch = Branch::kKnown;
  ChosenSource chosen_source = ChosenSource::kModelCorrect;
  RejectedSource rejected_source = RejectedSource::kRefusal;

  /// Throws InternalInconsistency if the branch/source invariants or
  /// chosen != rejected fail.
  void validate() const;
  bool operator==(const PreferencePair&) const = default;
};

nlohmann::json to_json(const PreferencePair& p);
PreferencePair preference_pair_from_json(const nlohmann::json& j);

enum class Confidence { kSumLogprob, kMeanTokenLogprob };

struct PairOptions {
  Confidence confidence = Confidence::kSumLogprob;
  /// Use the ground-truth string as the Known-branch chosen text.
  bool prefer_ground_truth = false;
};

PreferencePair build_pair(const probing::ProbeRecord& record, const Sample& sample,
                          const RefusalTemplate& tmpl, const PairOptions& options = {});

struct PairBuildResult {
  std::vector<PreferencePair> pairs;
  /// (sample id, reason) for records that could not yield a valid pair.
  std::vector<std::pair<std::string, std::string>> skipped;
};

/// One pair per record, in record order. Records whose sample is missing
/// throw InvalidArgument; records that cannot form a valid pair are skipped.
PairBuildResult build_pairs(const std::vector<probing::ProbeRecord>& records,
                            const std::vector<Sample>& samples, const RefusalTemplate& tmpl,
                            const PairOptions& options = {});

struct SftRecord {
  std::string sample_id;
  std::string prompt;
  std::string target;

  bool operator==(const SftRecord&) const = default;
};

std::vector<SftRecord> build_sft_dataset(const std::vector<PreferencePair>& pairs);

struct DatasetSplit {
  std::vector<PreferencePair> train;
  std::vector<PreferencePair> test;
  std::uint64_t seed = 0;
  double known_fraction_target = 0.6;
};

/// Seeded stratified split. Known counts are round(size * known_fraction).
DatasetSplit split_dataset(const std::vector<PreferencePair>& pairs, std::size_t train_size,
                           std::size_t test_size, double known_fraction, std::uint64_t seed);

double known_fraction(const std::vector<PreferencePair>& pairs);

/// JSONL with a leading `{"header": ...}` record.
void save_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs,
                const nlohmann::json& header);
std::vector<PreferencePair> load_pairs(const std::filesystem::path& path);
void save_sft(const std::filesystem::path& path, const std::vector<SftRecord>& records,
              const nlohmann::json& header);

}  // namespace kbound::pairgen
