#include "kbound/uncertainty/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "kbound/errors.hpp"
#include "kbound/evaluation/quadrants.hpp"
#include "kbound/util/jsonl.hpp"
#include "kbound/util/parallel.hpp"

namespace kbound::uncertainty {

using nlohmann::json;

std::string_view to_string(TargetKind k) {
  return k == TargetKind::kAnswer ? "answer" : "refusal-template";
}

TargetKind target_kind_from_string(std::string_view s) {
  if (s == "answer") return TargetKind::kAnswer;
  if (s == "refusal-template") return TargetKind::kRefusalTemplate;
  throw InvalidArgument("unknown target kind: " + std::string(s));
}

json to_json(const UncertaintyRecord& r) {
  return {{"sample_id", r.sample_id},
          {"category", to_string(r.category)},
          {"target_kind", to_string(r.target_kind)},
          {"mean_token_logprob", r.mean_token_logprob},
          {"ppl", r.ppl}};
}

UncertaintyRecord uncertainty_record_from_json(const json& j) {
  UncertaintyRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.category = mastery_from_string(j.at("category").get<std::string>());
  r.target_kind = target_kind_from_string(j.at("target_kind").get<std::string>());
  r.mean_token_logprob = j.at("mean_token_logprob").get<double>();
  r.ppl = j.at("ppl").get<double>();
  return r;
}

std::vector<UncertaintyRecord> load_uncertainty_records(const std::filesystem::path& path) {
  std::vector<UncertaintyRecord> out;
  for (const auto& j : util::read_jsonl(path)) out.push_back(uncertainty_record_from_json(j));
  return out;
}

void save_uncertainty_records(const std::filesystem::path& path, const std::vector<UncertaintyRecord>& records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  util::write_jsonl(path, rows);
}

double ppl_from_mean_logprob(double mean_logprob) {
  if (!std::isfinite(mean_logprob) || mean_logprob > 0.0) {
    throw InvalidArgument("mean logprob must be finite and <= 0");
  }
  return std::exp(-mean_logprob);
}

double mean_token_logprob(const gateway::ScoredSequence& scored) {
  if (scored.token_logprobs.empty()) throw NumericalFailure("scoring returned no tokens");
  return scored.total_logprob / static_cast<double>(scored.token_logprobs.size());
}

UncertaintyRecord forced_stats(const Sample& sample, gateway::ModelClient& model, std::string_view target_text,
                               Mastery category, TargetKind kind) {
  const auto scored = gateway::score_sequence(model, query_for(sample, sample.question), target_text);
  UncertaintyRecord r;
  r.sample_id = sample.id;
  r.category = category;
  r.target_kind = kind;
  r.mean_token_logprob = std::min(0.0, mean_token_logprob(scored));
  r.ppl = ppl_from_mean_logprob(r.mean_token_logprob);
  return r;
}

std::vector<UncertaintyRecord> probe_uncertainty(const std::vector<Sample>& samples,
                                                 const std::vector<probing::ProbeRecord>& probe_records,
                                                 gateway::ModelClient& model, const pairgen::RefusalTemplate& tmpl,
                                                 ProbeTargets targets) {
  const evaluation::MasteryIndex mastery(probe_records);
  std::vector<TargetKind> kinds;
  if (targets.answer) kinds.push_back(TargetKind::kAnswer);
  if (targets.refusal) kinds.push_back(TargetKind::kRefusalTemplate);
  if (kinds.empty()) throw InvalidArgument("probe_uncertainty: no target kinds selected");
  for (const auto& s : samples) mastery.at(s.id);

  std::vector<UncertaintyRecord> out(samples.size() * kinds.size());
  util::parallel_for(out.size(), static_cast<std::size_t>(model.endpoint().max_parallel), [&](std::size_t i) {
    const auto& s = samples[i / kinds.size()];
    const TargetKind k = kinds[i % kinds.size()];
    const std::string& target = k == TargetKind::kAnswer ? s.ground_truth : tmpl.canonical;
    out[i] = forced_stats(s, model, target, mastery.at(s.id), k);
  });
  return out;
}

double max_identity_deviation(const std::vector<UncertaintyRecord>& records) {
  double worst = 0.0;
  for (const auto& r : records) worst = std::max(worst, std::abs(r.ppl - std::exp(-r.mean_token_logprob)));
  return worst;
}

const SummaryCell* UncertaintySummary::find(Mastery m, TargetKind k) const {
  auto it = cells.find({m, k});
  return it == cells.end() ? nullptr : &it->second;
}

std::size_t UncertaintySummary::count(Mastery m) const {
  std::size_t best = 0;
  for (const auto& [key, cell] : cells) {
    if (key.first == m) best = std::max(best, cell.count);
  }
  return best;
}

json UncertaintySummary::to_json() const {
  json rows = json::array();
  for (const auto& [key, cell] : cells) {
    rows.push_back({{"category", kbound::to_string(key.first)},
                    {"target_kind", uncertainty::to_string(key.second)},
                    {"mean_logprob", cell.mean_logprob},
                    {"mean_ppl", cell.mean_ppl},
                    {"count", cell.count}});
  }
  return {{"cells", rows}};
}

UncertaintySummary UncertaintySummary::from_json(const json& j) {
  UncertaintySummary s;
  for (const auto& row : j.at("cells")) {
    s.cells[{mastery_from_string(row.at("category").get<std::string>()),
             target_kind_from_string(row.at("target_kind").get<std::string>())}] =
        SummaryCell{row.at("mean_logprob").get<double>(), row.at("mean_ppl").get<double>(),
                    row.at("count").get<std::size_t>()};
  }
  return s;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string category_label(Mastery m) {
  return m == Mastery::kKnown ? "Known Questions" : "Unknown Questions";
}

}  // namespace

std::string UncertaintySummary::markdown() const {
  std::ostringstream os;
  for (auto kind : kAllTargetKinds) {
    bool any = false;
    for (auto m : {Mastery::kKnown, Mastery::kUnknown}) any = any || find(m, kind);
    if (!any) continue;
    os << "Target: " << uncertainty::to_string(kind) << "\n\n";
    os << "| Category | Logprob | PPL | Count |\n|---|---:|---:|---:|\n";
    for (auto m : {Mastery::kKnown, Mastery::kUnknown}) {
      if (const auto* c = find(m, kind)) {
        os << "| " << category_label(m) << " | " << num(c->mean_logprob) << " | " << num(c->mean_ppl) << " | "
           << c->count << " |\n";
      }
    }
    os << "\n";
  }
  return os.str();
}

UncertaintySummary summarize(const std::vector<UncertaintyRecord>& records,
                             const std::vector<probing::ProbeRecord>& probe_records) {
  const evaluation::MasteryIndex mastery(probe_records);
  struct Acc {
    double logprob = 0.0;
    double ppl = 0.0;
    std::size_t n = 0;
  };
  std::map<std::pair<Mastery, TargetKind>, Acc> acc;
  for (const auto& r : records) {
    auto& a = acc[{mastery.at(r.sample_id), r.target_kind}];
    a.logprob += r.mean_token_logprob;
    a.ppl += r.ppl;
    a.n += 1;
  }
  UncertaintySummary s;
  for (const auto& [key, a] : acc) {
    const double n = static_cast<double>(a.n);
    s.cells[key] = SummaryCell{a.logprob / n, a.ppl / n, a.n};
  }
  return s;
}

const CellDelta& UncertaintyComparison::at(Mastery m, TargetKind k) const {
  for (const auto& c : cells) {
    if (c.category == m && c.target_kind == k) return c;
  }
  throw InvalidArgument("no comparison cell for " + std::string(kbound::to_string(m)) + "/" +
                        std::string(to_string(k)));
}

std::string UncertaintyComparison::markdown() const {
  std::ostringstream os;
  for (auto kind : kAllTargetKinds) {
    bool any = false;
    for (const auto& c : cells) any = any || c.target_kind == kind;
    if (!any) continue;
    os << "Target: " << to_string(kind) << "\n\n";
    os << "| Category | Logprob Pre-Align | Logprob Post-Align | PPL Pre-Align | PPL Post-Align |\n"
       << "|---|---:|---:|---:|---:|\n";
    for (const auto& c : cells) {
      if (c.target_kind != kind) continue;
      os << "| " << category_label(c.category) << " | " << num(c.pre.mean_logprob) << " | "
         << num(c.post.mean_logprob) << " | " << num(c.pre.mean_ppl) << " | " << num(c.post.mean_ppl) << " |\n";
    }
    os << "\n";
  }
  return os.str();
}

json UncertaintyComparison::to_json() const {
  json rows = json::array();
  for (const auto& c : cells) {
    rows.push_back({{"category", kbound::to_string(c.category)},
                    {"target_kind", uncertainty::to_string(c.target_kind)},
                    {"pre_logprob", c.pre.mean_logprob},
                    {"post_logprob", c.post.mean_logprob},
                    {"pre_ppl", c.pre.mean_ppl},
                    {"post_ppl", c.post.mean_ppl},
                    {"logprob_delta", c.logprob_delta()},
                    {"ppl_delta", c.ppl_delta()}});
  }
  return {{"cells", rows}};
}

UncertaintyComparison compare(const UncertaintySummary& pre, const UncertaintySummary& post) {
  UncertaintyComparison out;
  for (const auto& [key, cell] : pre.cells) {
    if (const auto* p = post.find(key.first, key.second)) {
      out.cells.push_back(CellDelta{key.first, key.second, cell, *p});
    }
  }
  return out;
}

}  // namespace kbound::uncertainty
