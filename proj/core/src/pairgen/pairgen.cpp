#include "kbound/pairgen/pairgen.hpp"

#include <optional>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <unordered_map>

#include "kbound/errors.hpp"
#include "kbound/util/jsonl.hpp"
#include "kbound/util/rng.hpp"
#include "kbound/util/text.hpp"

namespace kbound::pairgen {

using nlohmann::json;

bool RefusalTemplate::detects(std::string_view text) const {
  const std::string hay = util::to_lower(util::ascii_quotes(text));
  for (const auto& phrase : detector_phrases) {
    if (!phrase.empty() && hay.find(util::to_lower(util::ascii_quotes(phrase))) != std::string::npos) {
      return true;
    }
  }
  return false;
}

void RefusalTemplate::validate() const {
  if (canonical.empty()) throw ConfigurationError("refusal template is empty");
  if (!detects(canonical)) {
    throw ConfigurationError("refusal template not detected by its own phrase list: " + canonical);
  }
  if (!prompting_variant.empty() && !detects(prompting_variant)) {
    throw ConfigurationError("prompting refusal not detected by the phrase list: " + prompting_variant);
  }
}

json to_json(const RefusalTemplate& t) {
  return {{"canonical", t.canonical},
          {"prompting_variant", t.prompting_variant},
          {"detector_phrases", t.detector_phrases}};
}

RefusalTemplate refusal_template_from_json(const json& j) {
  RefusalTemplate t;
  t.canonical = j.value("canonical", t.canonical);
  t.prompting_variant = j.value("prompting_variant", t.prompting_variant);
  if (j.contains("detector_phrases")) t.detector_phrases = j["detector_phrases"].get<std::vector<std::string>>();
  return t;
}

std::string_view to_string(Branch b) { return b == Branch::kKnown ? "known" : "unknown"; }

std::string_view to_string(ChosenSource s) {
  switch (s) {
    case ChosenSource::kModelCorrect: return "model-correct";
    case ChosenSource::kGroundTruth: return "ground-truth";
    case ChosenSource::kRefusal: return "refusal";
  }
  return "?";
}

std::string_view to_string(RejectedSource s) {
  return s == RejectedSource::kRefusal ? "refusal" : "model-incorrect";
}

namespace {

Branch branch_from(std::string_view s) {
  if (s == "known") return Branch::kKnown;
  if (s == "unknown") return Branch::kUnknown;
  throw InvalidArgument("bad branch: " + std::string(s));
}

ChosenSource chosen_from(std::string_view s) {
  if (s == "model-correct") return ChosenSource::kModelCorrect;
  if (s == "ground-truth") return ChosenSource::kGroundTruth;
  if (s == "refusal") return ChosenSource::kRefusal;
  throw InvalidArgument("bad chosen_source: " + std::string(s));
}

RejectedSource rejected_from(std::string_view s) {
  if (s == "refusal") return RejectedSource::kRefusal;
  if (s == "model-incorrect") return RejectedSource::kModelIncorrect;
  throw InvalidArgument("bad rejected_source: " + std::string(s));
}

std::optional<double> confidence_of(const gateway::SampledResponse& r, Confidence mode) {
  if (!r.total_logprob) return std::nullopt;
  if (mode == Confidence::kSumLogprob) return *r.total_logprob;
  const std::size_t tokens = r.token_logprobs && !r.token_logprobs->empty()
                                 ? r.token_logprobs->size()
                                 : util::whitespace_token_count(r.text);
  return *r.total_logprob / static_cast<double>(tokens);
}

// Highest-confidence candidate; without log-probabilities the most frequent
// text wins. Ties keep the earliest draw.
const gateway::SampledResponse* most_confident(
    const std::vector<const gateway::SampledResponse*>& candidates, Confidence mode) {
  const gateway::SampledResponse* best = nullptr;
  std::optional<double> best_score;
  for (const auto* c : candidates) {
    const auto score = confidence_of(*c, mode);
    if (score && (!best_score || *score > *best_score)) {
      best = c;
      best_score = score;
    }
  }
  if (best != nullptr) return best;

  std::map<std::string, std::size_t> freq;
  for (const auto* c : candidates) ++freq[c->text];
  std::size_t best_count = 0;
  for (const auto* c : candidates) {
    if (freq[c->text] > best_count) {
      best = c;
      best_count = freq[c->text];
    }
  }
  return best;
}

}  // namespace

void PreferencePair::validate() const {
  const bool ok =
      branch == Branch::kKnown
          ? (chosen_source == ChosenSource::kModelCorrect || chosen_source == ChosenSource::kGroundTruth) &&
                rejected_source == RejectedSource::kRefusal
          : chosen_source == ChosenSource::kRefusal && rejected_source == RejectedSource::kModelIncorrect;
  if (!ok) throw InternalInconsistency("pair " + sample_id + ": sources do not match branch");
  if (chosen == rejected) throw InternalInconsistency("pair " + sample_id + ": chosen equals rejected");
}

json to_json(const PreferencePair& p) {
  return {{"sample_id", p.sample_id},
          {"prompt", p.prompt},
          {"chosen", p.chosen},
          {"rejected", p.rejected},
          {"branch", to_string(p.branch)},
          {"chosen_source", to_string(p.chosen_source)},
          {"rejected_source", to_string(p.rejected_source)}};
}

PreferencePair preference_pair_from_json(const json& j) {
  PreferencePair p;
  p.sample_id = j.at("sample_id").get<std::string>();
  p.prompt = j.at("prompt").get<std::string>();
  p.chosen = j.at("chosen").get<std::string>();
  p.rejected = j.at("rejected").get<std::string>();
  p.branch = branch_from(j.at("branch").get<std::string>());
  p.chosen_source = chosen_from(j.at("chosen_source").get<std::string>());
  p.rejected_source = rejected_from(j.at("rejected_source").get<std::string>());
  return p;
}

PreferencePair build_pair(const probing::ProbeRecord& record, const Sample& sample,
                          const RefusalTemplate& tmpl, const PairOptions& options) {
  if (record.responses.empty()) throw InvalidArgument("probe record " + record.sample_id + " has no responses");
  if (record.sample_id != sample.id) {
    throw InvalidArgument("probe record " + record.sample_id + " paired with sample " + sample.id);
  }
  PreferencePair pair;
  pair.sample_id = sample.id;
  pair.prompt = sample.question;

  if (record.label == Mastery::kKnown) {
    pair.branch = Branch::kKnown;
    std::vector<const gateway::SampledResponse*> correct;
    for (const auto& r : record.responses) {
      if (r.correct) correct.push_back(&r.response);
    }
    if (correct.empty()) {
      throw InternalInconsistency("Known record " + record.sample_id + " has no correct response");
    }
    const auto* best = options.prefer_ground_truth ? nullptr : most_confident(correct, options.confidence);
    if (best != nullptr && best->total_logprob) {
      pair.chosen = best->text;
      pair.chosen_source = ChosenSource::kModelCorrect;
    } else {
      pair.chosen = sample.ground_truth;
      pair.chosen_source = ChosenSource::kGroundTruth;
    }
    pair.rejected = tmpl.canonical;
    pair.rejected_source = RejectedSource::kRefusal;
  } else {
    pair.branch = Branch::kUnknown;
    std::vector<const gateway::SampledResponse*> incorrect;
    bool any_incorrect = false;
    for (const auto& r : record.responses) {
      if (r.correct) continue;
      any_incorrect = true;
      // A sampled refusal is not a hallucination and cannot be the rejected side.
      if (!util::trim(r.response.text).empty() && !tmpl.detects(r.response.text)) {
        incorrect.push_back(&r.response);
      }
    }
    if (!any_incorrect) {
      throw InternalInconsistency("Unknown record " + record.sample_id + " has no incorrect response");
    }
    if (incorrect.empty()) {
      throw InternalInconsistency("Unknown record " + record.sample_id +
                                  " has only refusals or empty text among incorrect responses");
    }
    pair.chosen = tmpl.canonical;
    pair.chosen_source = ChosenSource::kRefusal;
    pair.rejected = most_confident(incorrect, options.confidence)->text;
    pair.rejected_source = RejectedSource::kModelIncorrect;
  }
  pair.validate();
  return pair;
}

PairBuildResult build_pairs(const std::vector<probing::ProbeRecord>& records,
                            const std::vector<Sample>& samples, const RefusalTemplate& tmpl,
                            const PairOptions& options) {
  std::unordered_map<std::string, const Sample*> by_id;
  for (const auto& s : samples) by_id.emplace(s.id, &s);
  PairBuildResult out;
  for (const auto& rec : records) {
    auto it = by_id.find(rec.sample_id);
    if (it == by_id.end()) throw InvalidArgument("probe record for unknown sample " + rec.sample_id);
    try {
      out.pairs.push_back(build_pair(rec, *it->second, tmpl, options));
    } catch (const InternalInconsistency& e) {
      out.skipped.emplace_back(rec.sample_id, e.what());
    }
  }
  return out;
}

std::vector<SftRecord> build_sft_dataset(const std::vector<PreferencePair>& pairs) {
  std::vector<SftRecord> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.sample_id, p.prompt, p.chosen});
  return out;
}

namespace {

std::size_t known_count_for(std::size_t size, double fraction) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(size) * fraction));
}

bool feasible(std::size_t size, double fraction, std::size_t known_avail, std::size_t unknown_avail) {
  const std::size_t k = known_count_for(size, fraction);
  return k <= size && k <= known_avail && size - k <= unknown_avail;
}

std::size_t largest_feasible(std::size_t upper, double fraction, std::size_t known_avail,
                             std::size_t unknown_avail) {
  for (std::size_t s = upper;; --s) {
    if (feasible(s, fraction, known_avail, unknown_avail)) return s;
    if (s == 0) return 0;
  }
}

}  // namespace

DatasetSplit split_dataset(const std::vector<PreferencePair>& pairs, std::size_t train_size,
                           std::size_t test_size, double known_fraction, std::uint64_t seed) {
  if (!(known_fraction >= 0.0 && known_fraction <= 1.0)) {
    throw ConfigurationError("known_fraction must be in [0, 1]");
  }
  std::set<std::string> ids;
  std::vector<PreferencePair> known;
  std::vector<PreferencePair> unknown;
  for (const auto& p : pairs) {
    if (!ids.insert(p.sample_id).second) throw InvalidArgument("duplicate pair sample id " + p.sample_id);
    (p.branch == Branch::kKnown ? known : unknown).push_back(p);
  }

  const std::size_t train_known = known_count_for(train_size, known_fraction);
  const std::size_t test_known = known_count_for(test_size, known_fraction);
  const std::size_t train_unknown = train_size - train_known;
  const std::size_t test_unknown = test_size - test_known;

  if (train_known + test_known > known.size() || train_unknown + test_unknown > unknown.size()) {
    const std::size_t k_left = known.size() > test_known ? known.size() - test_known : 0;
    const std::size_t u_left = unknown.size() > test_unknown ? unknown.size() - test_unknown : 0;
    const std::size_t max_train = largest_feasible(train_size, known_fraction, k_left, u_left);
    const std::size_t k_left_t = known.size() > train_known ? known.size() - train_known : 0;
    const std::size_t u_left_t = unknown.size() > train_unknown ? unknown.size() - train_unknown : 0;
    const std::size_t max_test = largest_feasible(test_size, known_fraction, k_left_t, u_left_t);
    throw InsufficientPool("pool has " + std::to_string(known.size()) + " known / " +
                               std::to_string(unknown.size()) + " unknown pairs; request needs " +
                               std::to_string(train_known + test_known) + " known / " +
                               std::to_string(train_unknown + test_unknown) +
                               " unknown (max train " + std::to_string(max_train) + ", max test " +
                               std::to_string(max_test) + ")",
                           max_train, max_test);
  }

  std::mt19937_64 engine(util::derive_seed(seed, "split", 0));
  util::portable_shuffle(known.begin(), known.end(), engine);
  util::portable_shuffle(unknown.begin(), unknown.end(), engine);

  DatasetSplit split;
  split.seed = seed;
  split.known_fraction_target = known_fraction;
  auto take = [](std::vector<PreferencePair>& dst, const std::vector<PreferencePair>& src,
                 std::size_t from, std::size_t count) {
    dst.insert(dst.end(), src.begin() + static_cast<std::ptrdiff_t>(from),
               src.begin() + static_cast<std::ptrdiff_t>(from + count));
  };
  take(split.train, known, 0, train_known);
  take(split.train, unknown, 0, train_unknown);
  take(split.test, known, train_known, test_known);
  take(split.test, unknown, train_unknown, test_unknown);
  util::portable_shuffle(split.train.begin(), split.train.end(), engine);
  util::portable_shuffle(split.test.begin(), split.test.end(), engine);
  return split;
}

double known_fraction(const std::vector<PreferencePair>& pairs) {
  if (pairs.empty()) return 0.0;
  std::size_t k = 0;
  for (const auto& p : pairs) k += p.branch == Branch::kKnown ? 1 : 0;
  return static_cast<double>(k) / static_cast<double>(pairs.size());
}

void save_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs,
                const json& header) {
  std::vector<json> rows;
  rows.push_back({{"header", header}});
  for (const auto& p : pairs) rows.push_back(to_json(p));
  util::write_jsonl(path, rows);
}

std::vector<PreferencePair> load_pairs(const std::filesystem::path& path) {
  std::vector<PreferencePair> out;
  for (const auto& j : util::read_jsonl(path)) {
    if (j.contains("header")) continue;
    out.push_back(preference_pair_from_json(j));
  }
  return out;
}

void save_sft(const std::filesystem::path& path, const std::vector<SftRecord>& records,
              const json& header) {
  std::vector<json> rows;
  rows.push_back({{"header", header}});
  for (const auto& r : records) {
    rows.push_back({{"sample_id", r.sample_id}, {"prompt", r.prompt}, {"target", r.target}});
  }
  util::write_jsonl(path, rows);
}

}  // namespace kbound::pairgen
