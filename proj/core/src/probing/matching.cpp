#include "kbound/probing/matching.hpp"

#include <cctype>

#include "kbound/errors.hpp"
#include "kbound/util/text.hpp"

namespace kbound::probing {

std::string normalize_answer(std::string_view text, const std::vector<NormalizationRule>& rules) {
  std::string s = util::ascii_quotes(text);
  for (auto rule : rules) {
    switch (rule) {
      case NormalizationRule::kLowercase:
        s = util::to_lower(s);
        break;
      case NormalizationRule::kStripPunctuation: {
        std::string out;
        out.reserve(s.size());
        for (char c : s) {
          if (!std::ispunct(static_cast<unsigned char>(c))) out.push_back(c);
        }
        s = std::move(out);
        break;
      }
      case NormalizationRule::kCollapseWhitespace: {
        std::string out;
        for (const auto& tok : util::split_whitespace(s)) {
          if (!out.empty()) out.push_back(' ');
          out += tok;
        }
        s = std::move(out);
        break;
      }
      case NormalizationRule::kStripLeadingArticle: {
        // Repeated so that normalizing twice changes nothing ("a the x").
        s = util::trim(s);
        for (bool stripped = true; stripped;) {
          stripped = false;
          for (std::string_view article : {"the ", "an ", "a "}) {
            if (s.size() > article.size() && util::to_lower(s.substr(0, article.size())) == article) {
              s = util::trim(s.substr(article.size()));
              stripped = true;
              break;
            }
          }
        }
        break;
      }
    }
  }
  return util::trim(s);
}

std::string equivalence_prompt(std::string_view prediction, std::string_view ground_truth) {
  std::string p =
      "Decide whether the predicted answer states the same fact as the reference answer. "
      "Ignore wording, articles and extra context; compare meaning only.\n";
  p += "Reference answer: ";
  p += ground_truth;
  p += "\nPredicted answer: ";
  p += prediction;
  p += "\nReply with YES or NO only.";
  return p;
}

std::optional<bool> parse_yes_no(std::string_view reply) {
  const auto words = util::split_whitespace(reply);
  if (words.empty()) return std::nullopt;
  std::string w;
  for (char c : words.front()) {
    if (std::isalpha(static_cast<unsigned char>(c))) w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (w == "yes") return true;
  if (w == "no") return false;
  return std::nullopt;
}

bool match_answer(std::string_view prediction, std::string_view ground_truth,
                  const MatchPolicy& policy, gateway::ModelClient* judge,
                  std::string_view context_id) {
  if (util::trim(prediction).empty() || util::trim(ground_truth).empty()) {
    throw InvalidArgument("match_answer: empty prediction or ground truth");
  }
  if (policy.mode == MatchMode::kJudge && judge == nullptr) {
    throw ConfigurationError("judge match mode requires a judge endpoint");
  }
  const bool exact = normalize_answer(prediction, policy.normalization) ==
                     normalize_answer(ground_truth, policy.normalization);
  if (exact || policy.mode == MatchMode::kNormalizedExact) return exact;

  gateway::Query q{std::string(context_id), equivalence_prompt(prediction, ground_truth), ""};
  const auto verdict = parse_yes_no(gateway::greedy_answer(*judge, q).text);
  return verdict.value_or(exact);
}

std::string_view to_string(MatchMode mode) {
  return mode == MatchMode::kJudge ? "judge" : "normalized-exact";
}

MatchMode match_mode_from_string(std::string_view s) {
  if (s == "judge") return MatchMode::kJudge;
  if (s == "normalized-exact") return MatchMode::kNormalizedExact;
  throw ConfigurationError("unknown match mode: " + std::string(s));
}

}  // namespace kbound::probing
