#include "kbound/probing/probing.hpp"

#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <unordered_map>

#include "kbound/errors.hpp"
#include "kbound/util/hash.hpp"
#include "kbound/util/jsonl.hpp"
#include "kbound/util/parallel.hpp"
#include "kbound/util/text.hpp"

namespace kbound {

std::string_view to_string(Mastery m) { return m == Mastery::kKnown ? "Known" : "Unknown"; }

Mastery mastery_from_string(std::string_view s) {
  if (s == "Known") return Mastery::kKnown;
  if (s == "Unknown") return Mastery::kUnknown;
  throw InvalidArgument("unknown mastery label: " + std::string(s));
}

}  // namespace kbound

namespace kbound::probing {

using nlohmann::json;

int ProbeRecord::correct_count() const {
  int c = 0;
  for (const auto& r : responses) c += r.correct ? 1 : 0;
  return c;
}

json to_json(const ProbeRecord& r) {
  json responses = json::array();
  for (const auto& pr : r.responses) {
    auto j = gateway::to_json(pr.response);
    j["correct"] = pr.correct;
    responses.push_back(std::move(j));
  }
  return {{"sample_id", r.sample_id},
          {"responses", responses},
          {"accuracy", r.accuracy},
          {"label", to_string(r.label)},
          {"n", r.n},
          {"temperature", r.temperature},
          {"tau", r.tau},
          {"model", r.model},
          {"prompt_template_hash", r.prompt_template_hash}};
}

ProbeRecord probe_record_from_json(const json& j) {
  ProbeRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  for (const auto& pr : j.at("responses")) {
    r.responses.push_back({gateway::sampled_response_from_json(pr), pr.at("correct").get<bool>()});
  }
  r.accuracy = j.at("accuracy").get<double>();
  r.label = mastery_from_string(j.at("label").get<std::string>());
  r.n = j.at("n").get<int>();
  r.temperature = j.at("temperature").get<double>();
  r.tau = j.at("tau").get<double>();
  r.model = j.value("model", "");
  r.prompt_template_hash = j.value("prompt_template_hash", "");
  return r;
}

std::vector<ProbeRecord> load_probe_records(const std::filesystem::path& path) {
  std::vector<ProbeRecord> out;
  for (const auto& j : util::read_jsonl(path)) out.push_back(probe_record_from_json(j));
  return out;
}

void save_probe_records(const std::filesystem::path& path, const std::vector<ProbeRecord>& records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  util::write_jsonl(path, rows);
}

void ProbeParams::validate() const {
  if (n < 1) throw ConfigurationError("probing n must be >= 1");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigurationError("probing tau must be in (0, 1]");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw ConfigurationError("probing temperature must be >= 0");
  }
}

Mastery label_for(int correct, int n, double tau) {
  // correct/n >= tau  <=>  correct >= tau*n; the slack absorbs tau*n rounding up.
  return static_cast<double>(correct) >= tau * static_cast<double>(n) - 1e-9 ? Mastery::kKnown
                                                                             : Mastery::kUnknown;
}

std::string probe_prompt_template_hash() { return util::sha256_hex(kProbePromptTemplate); }

ProbeRecord probe_sample(const Sample& sample, gateway::ModelClient& model, const ProbeParams& params,
                         gateway::ModelClient* judge) {
  params.validate();
  ProbeRecord rec;
  rec.sample_id = sample.id;
  rec.n = params.n;
  rec.temperature = params.temperature;
  rec.tau = params.tau;
  rec.model = model.endpoint().name;
  rec.prompt_template_hash = probe_prompt_template_hash();

  const auto draws = gateway::sample_responses(model, query_for(sample, sample.question), params.n,
                                               params.temperature, params.seed);
  int correct = 0;
  for (const auto& d : draws) {
    const bool ok = !util::trim(d.text).empty() &&
                    match_answer(d.text, sample.ground_truth, params.policy, judge, sample.id);
    correct += ok ? 1 : 0;
    rec.responses.push_back({d, ok});
  }
  rec.accuracy = static_cast<double>(correct) / static_cast<double>(params.n);
  rec.label = label_for(correct, params.n, params.tau);
  return rec;
}

std::vector<ProbeRecord> probe_corpus(const std::vector<Sample>& samples, gateway::ModelClient& model,
                                      const ProbeParams& params, gateway::ModelClient* judge,
                                      const std::optional<std::filesystem::path>& checkpoint) {
  params.validate();
  std::unordered_map<std::string, ProbeRecord> resumed;
  std::ofstream checkpoint_log;
  if (checkpoint) {
    if (std::filesystem::exists(*checkpoint)) {
      for (const auto& j : util::read_jsonl(*checkpoint)) {
        auto r = probe_record_from_json(j);
        if (r.n == params.n && r.tau == params.tau && r.temperature == params.temperature &&
            r.model == model.endpoint().name) {
          resumed.insert_or_assign(r.sample_id, std::move(r));
        }
      }
    } else if (checkpoint->has_parent_path()) {
      std::filesystem::create_directories(checkpoint->parent_path());
    }
    checkpoint_log.open(*checkpoint, std::ios::app);
    if (!checkpoint_log) throw IoError("cannot open checkpoint " + checkpoint->string());
  }

  std::vector<std::optional<ProbeRecord>> slots(samples.size());
  std::mutex log_mutex;
  try {
    util::parallel_for(samples.size(), static_cast<std::size_t>(model.endpoint().max_parallel),
                       [&](std::size_t i) {
                         if (auto it = resumed.find(samples[i].id); it != resumed.end()) {
                           slots[i] = it->second;
                           return;
                         }
                         slots[i] = probe_sample(samples[i], model, params, judge);
                         if (checkpoint_log.is_open()) {
                           std::lock_guard lock(log_mutex);
                           checkpoint_log << to_json(*slots[i]).dump() << '\n';
                           checkpoint_log.flush();
                         }
                       });
  } catch (const RemoteUnavailable& e) {
    std::vector<std::string> done;
    for (const auto& s : slots) {
      if (s) done.push_back(s->sample_id);
    }
    throw RemoteUnavailable(e.what(), std::move(done));
  }

  std::vector<ProbeRecord> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

ProbeSummary summarize_probes(const std::vector<ProbeRecord>& records) {
  ProbeSummary s;
  s.total = records.size();
  for (const auto& r : records) {
    (r.label == Mastery::kKnown ? s.known : s.unknown) += 1;
    s.accuracy_histogram[r.accuracy] += 1;
  }
  s.known_fraction = s.total == 0 ? 0.0 : static_cast<double>(s.known) / static_cast<double>(s.total);
  return s;
}

json to_json(const ProbeSummary& s) {
  json hist = json::array();
  for (const auto& [acc, count] : s.accuracy_histogram) hist.push_back({{"accuracy", acc}, {"count", count}});
  return {{"total", s.total},
          {"known", s.known},
          {"unknown", s.unknown},
          {"known_fraction", s.known_fraction},
          {"accuracy_histogram", hist}};
}

std::filesystem::path probe_output_for(const std::filesystem::path& corpus) {
  auto stem = corpus;
  stem.replace_extension();
  return stem.string() + ".probe.jsonl";
}

}  // namespace kbound::probing
