#include "kbound/gateway/mock_model.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "kbound/errors.hpp"
#include "kbound/util/jsonl.hpp"
#include "kbound/util/rng.hpp"
#include "kbound/util/text.hpp"

namespace kbound::gateway {

void MockKnowledgeMap::add(const std::string& sample_id, MockEntry entry) {
  if (entry.correct_answer.empty()) {
    throw InvalidArgument("mock entry " + sample_id + ": empty correct answer");
  }
  if (!(entry.correct_prob >= 0.0 && entry.correct_prob <= 1.0)) {
    throw InvalidArgument("mock entry " + sample_id + ": correct_prob outside [0,1]");
  }
  double wrong_total = 0.0;
  for (const auto& [text, w] : entry.wrong_answers) {
    if (text.empty() || !(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidArgument("mock entry " + sample_id + ": bad wrong answer");
    }
    wrong_total += w;
  }
  if (entry.correct_prob < 1.0 && wrong_total <= 0.0) {
    throw InvalidArgument("mock entry " + sample_id +
                          ": correct_prob < 1 needs wrong answers carrying the remaining mass");
  }
  if (!entries_.emplace(sample_id, std::move(entry)).second) {
    throw InvalidArgument("duplicate mock sample id: " + sample_id);
  }
}

const MockEntry* MockKnowledgeMap::find(const std::string& sample_id) const {
  auto it = entries_.find(sample_id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::pair<std::string, double>> MockKnowledgeMap::distribution(const MockEntry& entry) {
  std::vector<std::pair<std::string, double>> dist;
  dist.emplace_back(entry.correct_answer, entry.correct_prob);
  double wrong_total = 0.0;
  for (const auto& [_, w] : entry.wrong_answers) wrong_total += w;
  const double rest = 1.0 - entry.correct_prob;
  for (const auto& [text, w] : entry.wrong_answers) {
    dist.emplace_back(text, wrong_total > 0.0 ? rest * w / wrong_total : 0.0);
  }
  return dist;
}

MockKnowledgeMap MockKnowledgeMap::from_json(const nlohmann::json& j) {
  MockKnowledgeMap map;
  for (const auto& [id, e] : j.items()) {
    MockEntry entry;
    entry.correct_answer = e.at("correct_answer").get<std::string>();
    entry.correct_prob = e.at("correct_prob").get<double>();
    for (const auto& w : e.value("wrong_answers", nlohmann::json::array())) {
      entry.wrong_answers.emplace_back(w.at("text").get<std::string>(), w.at("weight").get<double>());
    }
    map.add(id, std::move(entry));
  }
  return map;
}

MockKnowledgeMap MockKnowledgeMap::load(const std::filesystem::path& path) {
  return from_json(util::read_json(path));
}

nlohmann::json MockKnowledgeMap::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, e] : entries_) {
    nlohmann::json wrong = nlohmann::json::array();
    for (const auto& [text, w] : e.wrong_answers) wrong.push_back({{"text", text}, {"weight", w}});
    j[id] = {{"correct_answer", e.correct_answer},
             {"correct_prob", e.correct_prob},
             {"wrong_answers", wrong}};
  }
  return j;
}

std::vector<double> spread_logprob(std::string_view text, double total) {
  const std::size_t k = util::whitespace_token_count(text);
  return std::vector<double>(k, total / static_cast<double>(k));
}

MockModel::MockModel(ModelEndpoint endpoint, MockKnowledgeMap map)
    : endpoint_(std::move(endpoint)), map_(std::move(map)) {}

const MockEntry& MockModel::lookup(const std::string& sample_id) const {
  const MockEntry* e = map_.find(sample_id);
  if (e == nullptr) throw UnknownMockSample(sample_id);
  return *e;
}

namespace {

SampledResponse make_response(const std::string& text, double prob, int index) {
  SampledResponse r;
  r.text = text;
  r.total_logprob = std::log(prob);
  r.token_logprobs = spread_logprob(text, *r.total_logprob);
  r.sample_index = index;
  return r;
}

// Ties resolve to the earliest entry, i.e. the correct answer first.
std::size_t argmax(const std::vector<std::pair<std::string, double>>& dist) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    if (dist[i].second > dist[best].second) best = i;
  }
  return best;
}

}  // namespace

SampledResponse MockModel::draw(const Query& query, double temperature, std::uint64_t seed,
                                int sample_index) {
  count_call();
  const MockEntry& entry = lookup(query.sample_id);
  const auto dist = MockKnowledgeMap::distribution(entry);
  if (temperature == 0.0) {
    const std::size_t best = argmax(dist);
    return make_response(dist[best].first, dist[best].second, sample_index);
  }
  // Tempered weights p^(1/T); zero-probability answers are never drawn.
  std::vector<double> weights(dist.size(), 0.0);
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i].second > 0.0) weights[i] = std::pow(dist[i].second, 1.0 / temperature);
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::mt19937_64 engine(util::derive_seed(seed, query.sample_id, static_cast<std::uint64_t>(sample_index)));
  const double u = util::canonical(engine) * total;
  double cum = 0.0;
  std::size_t pick = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    pick = i;
    cum += weights[i];
    if (u < cum) break;
  }
  return make_response(dist[pick].first, dist[pick].second, sample_index);
}

SampledResponse MockModel::greedy(const Query& query) {
  count_call();
  const auto dist = MockKnowledgeMap::distribution(lookup(query.sample_id));
  const std::size_t best = argmax(dist);
  return make_response(dist[best].first, dist[best].second, 0);
}

ScoredSequence MockModel::score(const Query& query, std::string_view target) {
  count_call();
  const auto dist = MockKnowledgeMap::distribution(lookup(query.sample_id));
  const std::string t = util::trim(target);
  double prob = 0.0;
  for (const auto& [text, p] : dist) {
    if (text == t) prob += p;
  }
  ScoredSequence s;
  if (prob > 0.0) {
    s.total_logprob = std::log(prob);
    s.token_logprobs = spread_logprob(t, s.total_logprob);
  } else {
    s.token_logprobs.assign(util::whitespace_token_count(t), kUnlistedTokenLogprob);
    s.total_logprob = kUnlistedTokenLogprob * static_cast<double>(s.token_logprobs.size());
  }
  return s;
}

}  // namespace kbound::gateway
