#include "kbound/evaluation/quadrants.hpp"

#include "kbound/errors.hpp"
#include "kbound/util/jsonl.hpp"
#include "kbound/util/text.hpp"

namespace kbound::evaluation {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kCorrect: return "Correct";
    case Verdict::kRefusal: return "Refusal";
    case Verdict::kIncorrect: return "Incorrect";
  }
  return "?";
}

std::string_view to_string(Bucket b) {
  switch (b) {
    case Bucket::kIkIk: return "IK-IK";
    case Bucket::kIkIdk: return "IK-IDK";
    case Bucket::kIdkIk: return "IDK-IK";
    case Bucket::kIdkIdk: return "IDK-IDK";
    case Bucket::kWrongOnKnown: return "WRONG-ON-KNOWN";
  }
  return "?";
}

Verdict verdict_from_string(std::string_view s) {
  for (auto v : {Verdict::kCorrect, Verdict::kRefusal, Verdict::kIncorrect}) {
    if (to_string(v) == s) return v;
  }
  throw InvalidArgument("unknown verdict: " + std::string(s));
}

Bucket bucket_from_string(std::string_view s) {
  for (auto b : kAllBuckets) {
    if (to_string(b) == s) return b;
  }
  throw InvalidArgument("unknown bucket: " + std::string(s));
}

Bucket bucket_for(Mastery mastery, Verdict verdict) {
  switch (verdict) {
    case Verdict::kCorrect:
      return Bucket::kIkIk;
    case Verdict::kRefusal:
      return mastery == Mastery::kUnknown ? Bucket::kIkIdk : Bucket::kIdkIk;
    case Verdict::kIncorrect:
      return mastery == Mastery::kUnknown ? Bucket::kIdkIdk : Bucket::kWrongOnKnown;
  }
  return Bucket::kIdkIdk;
}

std::string abstention_prompt(std::string_view response) {
  std::string p =
      "Does the following response decline to answer, or say that the answer is not known?\n"
      "Response: ";
  p += response;
  p += "\nReply with YES or NO only.";
  return p;
}

bool verify(std::string_view prediction, const VerifyTarget& target, const pairgen::RefusalTemplate& tmpl,
            const VerifyOptions& options, gateway::ModelClient* judge, std::string_view context_id) {
  if (util::trim(prediction).empty()) throw InvalidArgument("verify: empty prediction");
  if (const auto* gt = std::get_if<GroundTruthTarget>(&target)) {
    return probing::match_answer(prediction, gt->answer, options.policy, judge, context_id);
  }
  if (tmpl.detects(prediction)) return true;
  if (!options.judge_refusal) return false;
  if (judge == nullptr) throw ConfigurationError("judge-based refusal detection needs a judge endpoint");
  gateway::Query q{std::string(context_id), abstention_prompt(prediction), ""};
  return probing::parse_yes_no(gateway::greedy_answer(*judge, q).text).value_or(false);
}

nlohmann::json to_json(const QuadrantOutcome& o) {
  return {{"sample_id", o.sample_id},
          {"mastery", to_string(o.mastery)},
          {"verdict", to_string(o.verdict)},
          {"bucket", to_string(o.bucket)},
          {"response", o.response}};
}

QuadrantOutcome outcome_from_json(const nlohmann::json& j) {
  QuadrantOutcome o;
  o.sample_id = j.at("sample_id").get<std::string>();
  o.mastery = mastery_from_string(j.at("mastery").get<std::string>());
  o.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  o.bucket = bucket_for(o.mastery, o.verdict);
  o.response = j.value("response", "");
  return o;
}

std::vector<QuadrantOutcome> load_outcomes(const std::filesystem::path& path) {
  std::vector<QuadrantOutcome> out;
  for (const auto& j : util::read_jsonl(path)) out.push_back(outcome_from_json(j));
  return out;
}

void save_outcomes(const std::filesystem::path& path, const std::vector<QuadrantOutcome>& outcomes) {
  std::vector<nlohmann::json> rows;
  rows.reserve(outcomes.size());
  for (const auto& o : outcomes) rows.push_back(to_json(o));
  util::write_jsonl(path, rows);
}

QuadrantOutcome classify(Mastery mastery, std::string_view prediction, const Sample& sample,
                         const pairgen::RefusalTemplate& tmpl, const VerifyOptions& options,
                         gateway::ModelClient* judge) {
  QuadrantOutcome o;
  o.sample_id = sample.id;
  o.mastery = mastery;
  o.response = std::string(prediction);
  if (util::trim(prediction).empty()) {
    o.verdict = Verdict::kIncorrect;
  } else if (verify(prediction, GroundTruthTarget{sample.ground_truth}, tmpl, options, judge, sample.id)) {
    o.verdict = Verdict::kCorrect;
  } else if (verify(prediction, RefusalTarget{}, tmpl, options, judge, sample.id)) {
    o.verdict = Verdict::kRefusal;
  } else {
    o.verdict = Verdict::kIncorrect;
  }
  o.bucket = bucket_for(mastery, o.verdict);
  return o;
}

MasteryIndex::MasteryIndex(const std::vector<probing::ProbeRecord>& records) {
  for (const auto& r : records) labels_.insert_or_assign(r.sample_id, r.label);
}

Mastery MasteryIndex::at(const std::string& sample_id) const {
  auto it = labels_.find(sample_id);
  if (it == labels_.end()) throw MissingMastery(sample_id);
  return it->second;
}

}  // namespace kbound::evaluation
