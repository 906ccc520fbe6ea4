#include "kbound/curation/curation.hpp"

#include <regex>

#include "kbound/errors.hpp"
#include "kbound/util/jsonl.hpp"
#include "kbound/util/parallel.hpp"
#include "kbound/util/text.hpp"

namespace kbound::curation {

using nlohmann::json;

json to_json(const CurationVerdict& v) {
  return {{"sample_id", v.sample_id},
          {"visual_clear", v.visual_clear},
          {"answer_precise", v.answer_precise},
          {"knowledge_intensive", v.knowledge_intensive},
          {"rationale", v.rationale},
          {"kept", v.kept},
          {"parse_failure", v.parse_failure}};
}

CurationVerdict verdict_from_json(const json& j) {
  CurationVerdict v;
  v.sample_id = j.at("sample_id").get<std::string>();
  v.visual_clear = j.at("visual_clear").get<bool>();
  v.answer_precise = j.at("answer_precise").get<bool>();
  v.knowledge_intensive = j.at("knowledge_intensive").get<bool>();
  v.rationale = j.value("rationale", "");
  v.kept = j.at("kept").get<bool>();
  v.parse_failure = j.value("parse_failure", false);
  return v;
}

Rubric Rubric::standard() {
  Rubric r;
  r.prompt =
      "You are screening image-question pairs for a knowledge benchmark. Look at the image and "
      "judge the pair on three criteria.\n"
      "1. VISUAL_CLEAR: the image is clear and unambiguous.\n"
      "2. ANSWER_PRECISE: the ground-truth answer is precise and unambiguous.\n"
      "3. KNOWLEDGE_INTENSIVE: answering needs world knowledge about what is shown, not reading "
      "text in the image (OCR) or simple perception.\n"
      "\n"
      "Question: {question}\n"
      "Ground-truth answer: {answer}\n"
      "\n"
      "Reply with exactly these lines and nothing else:\n"
      "VISUAL_CLEAR: YES or NO\n"
      "ANSWER_PRECISE: YES or NO\n"
      "KNOWLEDGE_INTENSIVE: YES or NO\n"
      "RATIONALE: <one sentence>";
  r.reprompt_suffix =
      "\n\nYour previous reply could not be parsed. Answer again using exactly the format above.";
  return r;
}

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines(1);
  for (char c : text) {
    if (c == '\n') {
      lines.emplace_back();
    } else if (c != '\r') {
      lines.back().push_back(c);
    }
  }
  return lines;
}

}  // namespace

std::string Rubric::render(const Sample& s) const {
  std::string out = prompt;
  replace_all(out, "{question}", s.question);
  replace_all(out, "{answer}", s.ground_truth);
  return out;
}

std::optional<ParsedJudgement> parse_judgement(std::string_view reply) {
  static const std::regex kFlag(
      R"(^\s*\**\s*(VISUAL_CLEAR|ANSWER_PRECISE|KNOWLEDGE_INTENSIVE)\s*\**\s*:\s*\**\s*(YES|NO)\b)",
      std::regex::icase);
  static const std::regex kRationale(R"(^\s*\**\s*RATIONALE\s*\**\s*:\s*(.*)$)", std::regex::icase);

  int seen[3] = {0, 0, 0};
  ParsedJudgement out{false, false, false, ""};
  for (const auto& raw : split_lines(reply)) {
    std::smatch m;
    if (std::regex_search(raw, m, kFlag)) {
      const std::string key = util::to_lower(m[1].str());
      const bool yes = util::to_lower(m[2].str()) == "yes";
      if (key == "visual_clear") {
        ++seen[0];
        out.visual_clear = yes;
      } else if (key == "answer_precise") {
        ++seen[1];
        out.answer_precise = yes;
      } else {
        ++seen[2];
        out.knowledge_intensive = yes;
      }
    } else if (std::regex_search(raw, m, kRationale)) {
      out.rationale = util::trim(m[1].str());
    }
  }
  if (seen[0] != 1 || seen[1] != 1 || seen[2] != 1) return std::nullopt;
  return out;
}

CurationVerdict curate_sample(const Sample& sample, gateway::ModelClient& judge,
                              const Rubric& rubric) {
  const std::string prompt = rubric.render(sample);
  CurationVerdict v;
  v.sample_id = sample.id;
  auto parsed = parse_judgement(gateway::greedy_answer(judge, query_for(sample, prompt)).text);
  if (!parsed) {
    parsed = parse_judgement(
        gateway::greedy_answer(judge, query_for(sample, prompt + rubric.reprompt_suffix)).text);
  }
  if (!parsed) {
    v.rationale = "unparseable";
    v.parse_failure = true;
    v.kept = false;
    return v;
  }
  v.visual_clear = parsed->visual_clear;
  v.answer_precise = parsed->answer_precise;
  v.knowledge_intensive = parsed->knowledge_intensive;
  v.rationale = parsed->rationale;
  v.kept = v.visual_clear && v.answer_precise && v.knowledge_intensive;
  return v;
}

CurationResult curate_corpus(const std::vector<Sample>& samples, gateway::ModelClient* judge,
                             const CurationOptions& options) {
  if (samples.empty()) throw InvalidArgument("curate_corpus: empty input");
  if (!options.passthrough && judge == nullptr) {
    throw ConfigurationError("curation needs a judge endpoint unless passthrough is enabled");
  }

  std::vector<std::optional<CurationVerdict>> slots(samples.size());
  auto write_sidecar = [&] {
    if (!options.verdict_sidecar) return;
    std::vector<json> rows;
    for (const auto& v : slots) {
      if (v) rows.push_back(to_json(*v));
    }
    util::write_jsonl(*options.verdict_sidecar, rows);
  };

  if (options.passthrough) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      slots[i] = CurationVerdict{samples[i].id, true, true, true, "passthrough", true, false};
    }
  } else {
    try {
      util::parallel_for(samples.size(), static_cast<std::size_t>(judge->endpoint().max_parallel),
                         [&](std::size_t i) { slots[i] = curate_sample(samples[i], *judge, options.rubric); });
    } catch (const RemoteUnavailable& e) {
      write_sidecar();
      std::vector<std::string> done;
      for (const auto& v : slots) {
        if (v) done.push_back(v->sample_id);
      }
      throw RemoteUnavailable(e.what(), std::move(done));
    }
  }

  CurationResult result;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    result.verdicts.push_back(*slots[i]);
    if (slots[i]->kept) result.kept.push_back(samples[i]);
  }
  write_sidecar();
  return result;
}

std::filesystem::path verdict_sidecar_for(const std::filesystem::path& corpus) {
  auto stem = corpus;
  stem.replace_extension();
  return stem.string() + ".verdicts.jsonl";
}

}  // namespace kbound::curation
