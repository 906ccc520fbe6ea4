#include "kbound/evaluation/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <tuple>

#include "kbound/errors.hpp"
#include "kbound/util/parallel.hpp"
#include "kbound/util/text.hpp"

namespace kbound::evaluation {

using nlohmann::json;

EvalReport compute_metrics(const std::vector<QuadrantOutcome>& outcomes, const ReportLabels& labels) {
  if (outcomes.empty()) throw EmptyEvaluation();
  EvalReport r;
  r.setting = labels.setting;
  r.model = labels.model;
  r.dataset = labels.dataset;
  r.total = outcomes.size();
  for (const auto& o : outcomes) {
    r.counts[static_cast<std::size_t>(bucket_for(o.mastery, o.verdict))] += 1;
    (o.mastery == Mastery::kKnown ? r.known : r.unknown) += 1;
  }
  const double d = static_cast<double>(r.total);
  r.rho_ik = static_cast<double>(r.count(Bucket::kIkIk)) / d;
  r.rho_idk = static_cast<double>(r.count(Bucket::kIkIdk)) / d;
  r.tax = static_cast<double>(r.count(Bucket::kIdkIk)) / d;
  r.hallucination = static_cast<double>(r.count(Bucket::kIdkIdk)) / d;
  r.wrong_on_known = static_cast<double>(r.count(Bucket::kWrongOnKnown)) / d;
  r.truthful = r.rho_ik + r.rho_idk;
  return r;
}

json to_json(const EvalReport& r) {
  json counts = json::object();
  for (auto b : kAllBuckets) counts[std::string(to_string(b))] = r.count(b);
  return {{"counts", counts},
          {"total", r.total},
          {"known", r.known},
          {"unknown", r.unknown},
          {"rho_ik", r.rho_ik},
          {"rho_idk", r.rho_idk},
          {"truthful", r.truthful},
          {"tax", r.tax},
          {"hallucination", r.hallucination},
          {"wrong_on_known", r.wrong_on_known},
          {"setting", r.setting},
          {"model", r.model},
          {"dataset", r.dataset}};
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  for (auto b : kAllBuckets) {
    r.counts[static_cast<std::size_t>(b)] = j.at("counts").value(std::string(to_string(b)), std::size_t{0});
  }
  r.total = j.at("total").get<std::size_t>();
  r.known = j.value("known", std::size_t{0});
  r.unknown = j.value("unknown", std::size_t{0});
  r.rho_ik = j.at("rho_ik").get<double>();
  r.rho_idk = j.at("rho_idk").get<double>();
  r.truthful = j.at("truthful").get<double>();
  r.tax = j.value("tax", 0.0);
  r.hallucination = j.value("hallucination", 0.0);
  r.wrong_on_known = j.value("wrong_on_known", 0.0);
  r.setting = j.value("setting", "");
  r.model = j.value("model", "");
  r.dataset = j.value("dataset", "");
  return r;
}

namespace {

std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", fraction * 100.0);
  return buf;
}

}  // namespace

std::string report_markdown(const EvalReport& r, bool fold_wrong_on_known) {
  std::ostringstream os;
  os << "**" << (r.model.empty() ? "model" : r.model) << "**";
  if (!r.setting.empty()) os << " (" << r.setting << ")";
  if (!r.dataset.empty()) os << " on " << r.dataset;
  os << ", |D| = " << r.total << " (" << r.known << " Known / " << r.unknown << " Unknown)\n\n";
  os << "| Bucket | Count | Rate (%) |\n|---|---:|---:|\n";
  for (auto b : kAllBuckets) {
    std::size_t c = r.count(b);
    if (fold_wrong_on_known) {
      if (b == Bucket::kWrongOnKnown) continue;
      if (b == Bucket::kIdkIdk) c += r.count(Bucket::kWrongOnKnown);
    }
    os << "| " << to_string(b) << " | " << c << " | " << pct(static_cast<double>(c) / static_cast<double>(r.total))
       << " |\n";
  }
  os << "\n| IK-IK | IK-IDK | Truthful |\n|---:|---:|---:|\n";
  os << "| " << pct(r.rho_ik) << " | " << pct(r.rho_idk) << " | " << pct(r.truthful) << " |\n";
  return os.str();
}

double refusal_rate_ood(const std::vector<std::string>& responses, const pairgen::RefusalTemplate& tmpl,
                        const VerifyOptions& options, gateway::ModelClient* judge) {
  if (responses.empty()) return 0.0;
  std::size_t refusals = 0;
  for (const auto& r : responses) {
    if (!util::trim(r).empty() && verify(r, RefusalTarget{}, tmpl, options, judge)) ++refusals;
  }
  return static_cast<double>(refusals) / static_cast<double>(responses.size());
}

std::vector<QuadrantOutcome> classify_ood(const std::vector<Sample>& samples,
                                          const std::vector<std::string>& responses,
                                          const pairgen::RefusalTemplate& tmpl, const VerifyOptions& options,
                                          gateway::ModelClient* judge) {
  if (samples.size() != responses.size()) throw InvalidArgument("classify_ood: samples/responses size mismatch");
  std::vector<QuadrantOutcome> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    QuadrantOutcome o;
    o.sample_id = samples[i].id;
    o.mastery = Mastery::kUnknown;
    o.response = responses[i];
    const bool refused = !util::trim(responses[i]).empty() &&
                         verify(responses[i], RefusalTarget{}, tmpl, options, judge, samples[i].id);
    o.verdict = refused ? Verdict::kRefusal : Verdict::kIncorrect;
    o.bucket = bucket_for(o.mastery, o.verdict);
    out.push_back(std::move(o));
  }
  return out;
}

std::string MetricDelta::formatted_delta() const {
  char buf[32];
  const double rounded = std::round(delta_pp * 10.0) / 10.0;
  if (rounded == 0.0) return "0.0";
  std::snprintf(buf, sizeof(buf), "%+.1f%s", rounded, rounded > 0 ? "↑" : "↓");
  return buf;
}

const MetricDelta& DeltaTable::at(std::string_view metric) const {
  for (const auto& r : rows) {
    if (r.metric == metric) return r;
  }
  throw InvalidArgument("no delta row for " + std::string(metric));
}

std::string DeltaTable::markdown() const {
  auto cell = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return std::string(buf);
  };
  std::ostringstream os;
  if (!setting.empty()) os << "Setting: " << setting << "\n\n";
  os << "| Method | IK-IK | IK-IDK | Truthful |\n|---|---:|---:|---:|\n";
  const auto& ik = at("IK-IK");
  const auto& idk = at("IK-IDK");
  const auto& t = at("Truthful");
  os << "| " << (base_model.empty() ? "Base" : base_model) << " | " << cell(ik.base_pct) << " | "
     << cell(idk.base_pct) << " | " << cell(t.base_pct) << " |\n";
  os << "| " << (aligned_model.empty() ? "Aligned" : aligned_model) << " | " << cell(ik.aligned_pct) << " ("
     << ik.formatted_delta() << ") | " << cell(idk.aligned_pct) << " (" << idk.formatted_delta() << ") | "
     << cell(t.aligned_pct) << " (" << t.formatted_delta() << ") |\n";
  os << "\n| Metric | Base (%) | Aligned (%) | Delta (pp) |\n|---|---:|---:|---:|\n";
  for (const auto& r : rows) {
    os << "| " << r.metric << " | " << cell(r.base_pct) << " | " << cell(r.aligned_pct) << " | "
       << r.formatted_delta() << " |\n";
  }
  return os.str();
}

json DeltaTable::to_json() const {
  json rs = json::array();
  for (const auto& r : rows) {
    rs.push_back({{"metric", r.metric},
                  {"base_pct", r.base_pct},
                  {"aligned_pct", r.aligned_pct},
                  {"delta_pp", r.delta_pp},
                  {"formatted", r.formatted_delta()}});
  }
  return {{"setting", setting}, {"base_model", base_model}, {"aligned_model", aligned_model}, {"rows", rs}};
}

DeltaTable compare_reports(const EvalReport& base, const EvalReport& aligned) {
  if (base.total != aligned.total) {
    throw IncomparableReports("reports cover different dataset sizes (" + std::to_string(base.total) + " vs " +
                              std::to_string(aligned.total) + ")");
  }
  if (base.setting != aligned.setting) {
    throw IncomparableReports("reports use different settings (" + base.setting + " vs " + aligned.setting + ")");
  }
  DeltaTable t;
  t.setting = base.setting;
  t.base_model = base.model;
  t.aligned_model = aligned.model;
  auto add = [&](std::string name, double b, double a) {
    t.rows.push_back({std::move(name), b * 100.0, a * 100.0, (a - b) * 100.0});
  };
  add("IK-IK", base.rho_ik, aligned.rho_ik);
  add("IK-IDK", base.rho_idk, aligned.rho_idk);
  add("Truthful", base.truthful, aligned.truthful);
  add("IDK-IK", base.tax, aligned.tax);
  add("IDK-IDK", base.hallucination, aligned.hallucination);
  add("WRONG-ON-KNOWN", base.wrong_on_known, aligned.wrong_on_known);
  return t;
}

std::string render_chart_data(const std::vector<EvalReport>& reports, ChartGrouping grouping) {
  if (reports.empty()) throw InvalidArgument("render_chart_data: no reports");
  std::vector<const EvalReport*> order;
  for (const auto& r : reports) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [grouping](const EvalReport* a, const EvalReport* b) {
    return grouping == ChartGrouping::kByMethod ? std::tie(a->model, a->dataset) < std::tie(b->model, b->dataset)
                                                : std::tie(a->dataset, a->model) < std::tie(b->dataset, b->model);
  });
  auto csv_field = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  };
  std::string out = "method,dataset,truthful\n";
  char buf[32];
  for (const auto* r : order) {
    std::snprintf(buf, sizeof(buf), "%.1f", r->truthful * 100.0);
    out += csv_field(r->model) + "," + csv_field(r->dataset) + "," + buf + "\n";
  }
  return out;
}

EvaluationRun evaluate_corpus(const std::vector<Sample>& samples,
                              const std::vector<probing::ProbeRecord>& probe_records,
                              gateway::ModelClient& model, const EvalSetting& setting,
                              const pairgen::RefusalTemplate& tmpl, const VerifyOptions& options,
                              gateway::ModelClient* judge, const std::string& dataset) {
  setting.validate();
  const bool ood = setting.mode == EvalMode::kRefusalOnlyOod;
  const MasteryIndex mastery(probe_records);
  if (!ood) {
    for (const auto& s : samples) mastery.at(s.id);
  }

  std::vector<std::string> responses(samples.size());
  util::parallel_for(samples.size(), static_cast<std::size_t>(model.endpoint().max_parallel),
                     [&](std::size_t i) {
                       responses[i] =
                           gateway::greedy_answer(model, query_for(samples[i], build_prompt(samples[i], setting))).text;
                     });

  EvaluationRun run;
  if (ood) {
    run.outcomes = classify_ood(samples, responses, tmpl, options, judge);
  } else {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      run.outcomes.push_back(classify(mastery.at(samples[i].id), responses[i], samples[i], tmpl, options, judge));
    }
  }
  run.report = compute_metrics(run.outcomes, {std::string(to_string(setting.mode)), model.endpoint().name, dataset});
  return run;
}

}  // namespace kbound::evaluation
