#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kbound/gateway/client.hpp"

namespace kbound::probing {

enum class MatchMode { kNormalizedExact, kJudge };

enum class NormalizationRule { kLowercase, kStripPunctuation, kCollapseWhitespace, kStripLeadingArticle };

struct MatchPolicy {
  MatchMode mode = MatchMode::kNormalizedExact;
  std::vector<NormalizationRule> normalization = default_rules();

  static std::vector<NormalizationRule> default_rules() {
    return {NormalizationRule::kLowercase, NormalizationRule::kStripPunctuation,
            NormalizationRule::kCollapseWhitespace, NormalizationRule::kStripLeadingArticle};
  }
};

/// Applies the rules in order. Punctuation is removed, not replaced.
std::string normalize_answer(std::string_view text, const std::vector<NormalizationRule>& rules);

std::string equivalence_prompt(std::string_view prediction, std::string_view ground_truth);

/// First word of the reply as YES/NO, ignoring case and punctuation.
std::optional<bool> parse_yes_no(std::string_view reply);

/// Normalized-exact comparison, or a judge equivalence check in judge mode.
/// A normalized-exact hit short-circuits the judge; an unparseable judge reply
/// falls back to the normalized-exact result. `context_id` is forwarded as the
/// judge query's sample id.
bool match_answer(std::string_view prediction, std::string_view ground_truth,
                  const MatchPolicy& policy, gateway::ModelClient* judge = nullptr,
                  std::string_view context_id = {});

std::string_view to_string(MatchMode mode);
MatchMode match_mode_from_string(std::string_view s);

}  // namespace kbound::probing
