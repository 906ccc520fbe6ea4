#include "kbound/gateway/scripted_judge.hpp"

#include "kbound/errors.hpp"
#include "kbound/util/jsonl.hpp"

namespace kbound::gateway {

ScriptedJudge::ScriptedJudge(ModelEndpoint endpoint, std::vector<Rule> rules,
                             std::string default_reply)
    : endpoint_(std::move(endpoint)) {
  responder_ = [rules = std::move(rules), fallback = std::move(default_reply)](const Query& q) {
    for (const auto& rule : rules) {
      bool all = true;
      for (const auto& needle : rule.contains) {
        if (q.prompt.find(needle) == std::string::npos) {
          all = false;
          break;
        }
      }
      if (all) return rule.reply;
    }
    return fallback;
  };
}

ScriptedJudge::ScriptedJudge(ModelEndpoint endpoint, Responder responder)
    : endpoint_(std::move(endpoint)), responder_(std::move(responder)) {}

std::unique_ptr<ScriptedJudge> ScriptedJudge::load(ModelEndpoint endpoint, const std::filesystem::path& path) {
  const auto j = util::read_json(path);
  std::vector<Rule> rules;
  for (const auto& r : j.value("rules", nlohmann::json::array())) {
    Rule rule;
    const auto& c = r.at("contains");
    if (c.is_string()) {
      rule.contains.push_back(c.get<std::string>());
    } else {
      rule.contains = c.get<std::vector<std::string>>();
    }
    rule.reply = r.at("reply").get<std::string>();
    rules.push_back(std::move(rule));
  }
  return std::make_unique<ScriptedJudge>(std::move(endpoint), std::move(rules), j.value("default", ""));
}

SampledResponse ScriptedJudge::draw(const Query& query, double, std::uint64_t, int sample_index) {
  auto r = greedy(query);
  r.sample_index = sample_index;
  return r;
}

SampledResponse ScriptedJudge::greedy(const Query& query) {
  count_call();
  SampledResponse r;
  r.text = responder_(query);
  return r;
}

ScoredSequence ScriptedJudge::score(const Query&, std::string_view) {
  throw ScoringUnsupported(endpoint_.name);
}

}  // namespace kbound::gateway
