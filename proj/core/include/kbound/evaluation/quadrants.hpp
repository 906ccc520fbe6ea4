/// @file quadrants.hpp
/// @brief Response verification and knowledge-quadrant classification.
///
/// A response is Correct if it matches the ground truth, else Refusal if it
/// expresses abstention, else Incorrect. Buckets combine that verdict with
/// the sample's probed mastery:
///
///   Correct                 -> IK-IK (either mastery)
///   Unknown + Refusal       -> IK-IDK
///   Known   + Refusal       -> IDK-IK  (alignment tax)
///   Unknown + Incorrect     -> IDK-IDK (hallucination)
///   Known   + Incorrect     -> WRONG-ON-KNOWN

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kbound/curation/sample.hpp"
#include "kbound/gateway/client.hpp"
#include "kbound/pairgen/pairgen.hpp"
#include "kbound/probing/matching.hpp"
#include "kbound/probing/probing.hpp"

namespace kbound::evaluation {

enum class Verdict { kCorrect, kRefusal, kIncorrect };
enum class Bucket { kIkIk, kIkIdk, kIdkIk, kIdkIdk, kWrongOnKnown };
inline constexpr std::size_t kBucketCount = 5;
inline constexpr Bucket kAllBuckets[kBucketCount] = {Bucket::kIkIk, Bucket::kIkIdk, Bucket::kIdkIk,
                                                     Bucket::kIdkIdk, Bucket::kWrongOnKnown};

std::string_view to_string(Verdict v);
std::string_view to_string(Bucket b);
Verdict verdict_from_string(std::string_view s);
Bucket bucket_from_string(std::string_view s);

Bucket bucket_for(Mastery mastery, Verdict verdict);

struct GroundTruthTarget {
  std::string answer;
};
struct RefusalTarget {};
using VerifyTarget = std::variant<GroundTruthTarget, RefusalTarget>;

struct VerifyOptions {
  probing::MatchPolicy policy;
  /// Ask the judge about abstention when no detector phrase matches.
  bool judge_refusal = false;
};

std::string abstention_prompt(std::string_view response);

/// True if `prediction` realizes the target. Throws InvalidArgument on an
/// empty prediction and ConfigurationError when a judge is needed but absent.
bool verify(std::string_view prediction, const VerifyTarget& target, const pairgen::RefusalTemplate& tmpl,
            const VerifyOptions& options = {}, gateway::ModelClient* judge = nullptr,
            std::string_view context_id = {});

struct QuadrantOutcome {
  std::string sample_id;
  Mastery mastery = Mastery::kUnknown;
  Verdict verdict = Verdict::kIncorrect;
  Bucket bucket = Bucket::kIdkIdk;
  std::string response;

  bool operator==(const QuadrantOutcome&) const = default;
};

nlohmann::json to_json(const QuadrantOutcome& o);
QuadrantOutcome outcome_from_json(const nlohmann::json& j);
std::vector<QuadrantOutcome> load_outcomes(const std::filesystem::path& path);
void save_outcomes(const std::filesystem::path& path, const std::vector<QuadrantOutcome>& outcomes);

/// Correct is tested first, then Refusal. An empty response is Incorrect.
QuadrantOutcome classify(Mastery mastery, std::string_view prediction, const Sample& sample,
                         const pairgen::RefusalTemplate& tmpl, const VerifyOptions& options = {},
                         gateway::ModelClient* judge = nullptr);

/// Mastery lookup by sample id; throws MissingMastery.
class MasteryIndex {
 public:
  explicit MasteryIndex(const std::vector<probing::ProbeRecord>& records);
  Mastery at(const std::string& sample_id) const;
  bool contains(const std::string& sample_id) const { return labels_.count(sample_id) != 0; }

 private:
  std::map<std::string, Mastery> labels_;
};

}  // namespace kbound::evaluation
