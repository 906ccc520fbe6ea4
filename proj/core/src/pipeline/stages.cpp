#include "kbound/pipeline/stages.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "kbound/curation/curation.hpp"
#include "kbound/errors.hpp"
#include "kbound/evaluation/reports.hpp"
#include "kbound/gateway/caching_client.hpp"
#include "kbound/losses/grad_check.hpp"
#include "kbound/losses/trainer.hpp"
#include "kbound/pairgen/pairgen.hpp"
#include "kbound/probing/probing.hpp"
#include "kbound/uncertainty/uncertainty.hpp"
#include "kbound/util/jsonl.hpp"
#include "kbound/util/rng.hpp"

namespace kbound::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Loads a corpus with relative image paths anchored at the corpus file.
std::vector<Sample> load_corpus(const fs::path& path) {
  auto samples = load_samples(path);
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  for (auto& s : samples) {
    const auto& ref = s.image_ref;
    if (ref.empty() || ref.find("://") != std::string::npos || ref.rfind("data:", 0) == 0) continue;
    if (fs::path(ref).is_relative()) s.image_ref = (base / ref).lexically_normal().string();
  }
  return samples;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  fs::create_directories(config_.paths.out_dir);
  if (!config_.paths.cache_dir.empty()) {
    cache_ = std::make_shared<gateway::ResponseCache>(config_.paths.cache_dir);
  }
}

gateway::ModelClient& Pipeline::model() {
  if (!model_) model_ = gateway::make_client(config_.model, cache_);
  return *model_;
}

gateway::ModelClient* Pipeline::judge() {
  if (!config_.judge) return nullptr;
  if (!judge_) judge_ = gateway::make_client(*config_.judge, cache_);
  return judge_.get();
}

void Pipeline::finish(const std::string& command, const std::string& started, StageResult& result) {
  const auto config_dump = out(command + ".config.json");
  util::write_json(config_dump, json{{"config_hash", config_.hash}, {"config", config_.effective}});
  result.outputs.push_back(config_dump);

  RunManifest m;
  m.command = command;
  m.config_hash = config_.hash;
  for (const auto& p : result.inputs) m.inputs.push_back(describe_artifact(p));
  for (const auto& p : result.outputs) m.outputs.push_back(describe_artifact(p));
  m.started_at = started;
  m.finished_at = utc_now();
  m.tool_version = tool_version();
  write_manifest(result.outputs.front(), m);
  result.manifest = manifest_path_for(result.outputs.front());
}

namespace {

json pair_header(const PipelineConfig& c) {
  return {{"config_hash", c.hash}, {"seed", c.seed},   {"model", c.model.name},
          {"n", c.probing.n},      {"tau", c.probing.tau}, {"temperature", c.probing.temperature}};
}

std::string safe_name(std::string s) {
  for (char& ch : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
    if (!ok) ch = '_';
  }
  return s;
}

}  // namespace

StageResult Pipeline::curate(const StageInputs& in) {
  const auto started = utc_now();
  StageResult r;
  const fs::path corpus = in.corpus.value_or(config_.paths.corpus);
  if (corpus.empty()) throw ConfigurationError("curate needs paths.corpus or an input corpus");
  r.inputs.push_back(corpus);
  const auto samples = load_corpus(corpus);

  curation::CurationOptions opts;
  opts.rubric = config_.rubric;
  opts.passthrough = config_.curation_passthrough;
  opts.verdict_sidecar = out("curated.verdicts.jsonl");
  const auto result = curation::curate_corpus(samples, opts.passthrough ? nullptr : judge(), opts);
  save_samples(out("curated.jsonl"), result.kept);
  r.outputs = {out("curated.jsonl"), *opts.verdict_sidecar};

  std::size_t parse_failures = 0;
  for (const auto& v : result.verdicts) parse_failures += v.parse_failure ? 1 : 0;
  r.summary = {{"input", samples.size()}, {"kept", result.kept.size()}, {"parse_failures", parse_failures}};
  finish("curate", started, r);
  return r;
}

StageResult Pipeline::probe(const StageInputs& in) {
  const auto started = utc_now();
  StageResult r;
  const fs::path corpus = in.corpus.value_or(out("curated.jsonl"));
  r.inputs.push_back(corpus);
  const auto samples = load_corpus(corpus);
  const auto records =
      probing::probe_corpus(samples, model(), config_.probing, judge(), out("probe.checkpoint.jsonl"));
  probing::save_probe_records(out("probe.jsonl"), records);
  r.outputs.push_back(out("probe.jsonl"));
  r.summary = probing::to_json(probing::summarize_probes(records));
  finish("probe", started, r);
  return r;
}

StageResult Pipeline::pairgen(const StageInputs& in) {
  const auto started = utc_now();
  StageResult r;
  const fs::path corpus = in.corpus.value_or(out("curated.jsonl"));
  const fs::path probe_path = in.probe.value_or(out("probe.jsonl"));
  r.inputs = {corpus, probe_path};
  const auto samples = load_corpus(corpus);
  const auto records = probing::load_probe_records(probe_path);

  const auto built = pairgen::build_pairs(records, samples, config_.refusal, config_.pairs);
  const auto split = pairgen::split_dataset(built.pairs, config_.split.train, config_.split.test,
                                            config_.split.known_fraction, config_.seed);
  const json header = pair_header(config_);
  pairgen::save_pairs(out("pairs.jsonl"), built.pairs, header);
  pairgen::save_pairs(out("train.pairs.jsonl"), split.train, header);
  pairgen::save_pairs(out("test.pairs.jsonl"), split.test, header);
  pairgen::save_sft(out("train.sft.jsonl"), pairgen::build_sft_dataset(split.train), header);

  json skipped = json::array();
  for (const auto& [id, reason] : built.skipped) skipped.push_back({{"sample_id", id}, {"reason", reason}});
  r.summary = {{"pairs", built.pairs.size()},
               {"skipped", skipped},
               {"train", split.train.size()},
               {"test", split.test.size()},
               {"train_known_fraction", pairgen::known_fraction(split.train)},
               {"test_known_fraction", pairgen::known_fraction(split.test)},
               {"pool_known_fraction", pairgen::known_fraction(built.pairs)}};
  util::write_json(out("pairgen.summary.json"), r.summary);
  r.outputs = {out("pairs.jsonl"), out("train.pairs.jsonl"), out("test.pairs.jsonl"), out("train.sft.jsonl"),
               out("pairgen.summary.json")};
  finish("pairgen", started, r);
  return r;
}

StageResult Pipeline::losses_check(std::size_t policies) {
  const auto started = utc_now();
  StageResult r;
  std::map<losses::Objective, losses::GradCheckResult> worst;
  std::map<losses::Objective, std::size_t> skipped;
  for (std::size_t k = 0; k < policies; ++k) {
    std::mt19937_64 rng(util::derive_seed(config_.seed, "losses-check", k));
    const std::size_t dim = 2 + util::bounded(rng, 49);
    const std::size_t prompts = 2 + util::bounded(rng, 4);
    std::vector<losses::ToyPrompt> ps;
    std::vector<losses::ToyPairIndex> pairs;
    for (std::size_t p = 0; p < prompts; ++p) {
      losses::ToyPrompt tp{"prompt " + std::to_string(p), {}};
      const std::size_t responses = 3 + util::bounded(rng, 3);
      for (std::size_t i = 0; i < responses; ++i) {
        tp.responses.push_back(std::string(1 + util::bounded(rng, 4), 'x') + " r" + std::to_string(i));
      }
      ps.push_back(std::move(tp));
      pairs.push_back({p, 0, 1});
    }
    const std::uint64_t seed = rng();
    const losses::ToyPolicy policy(ps, dim, seed);
    losses::ToyPolicy reference(ps, dim, seed);
    std::vector<double> ref_theta(policy.theta().begin(), policy.theta().end());
    for (auto& t : ref_theta) t += 0.2 * (util::canonical(rng) - 0.5);
    reference.set_theta(std::move(ref_theta));

    for (auto objective : losses::kAllObjectives) {
      const auto res = losses::grad_check(objective, policy, &reference, pairs, config_.hyperparams);
      if (res.skipped) {
        skipped[objective] += 1;
        continue;
      }
      auto& w = worst[objective];
      w.max_relative_error = std::max(w.max_relative_error, res.max_relative_error);
      w.coordinates += res.coordinates;
    }
  }
  json rows = json::object();
  bool ok = true;
  for (auto objective : losses::kAllObjectives) {
    const auto& w = worst[objective];
    const bool pass = w.max_relative_error <= 1e-4;
    ok = ok && pass;
    rows[std::string(losses::to_string(objective))] = {{"max_relative_error", w.max_relative_error},
                                                       {"coordinates", w.coordinates},
                                                       {"skipped_policies", skipped[objective]},
                                                       {"pass", pass}};
  }
  r.summary = {{"policies", policies}, {"tolerance", 1e-4}, {"objectives", rows}, {"pass", ok}};
  r.passed = ok;
  util::write_json(out("losses-check.json"), r.summary);
  r.outputs.push_back(out("losses-check.json"));
  finish("losses-check", started, r);
  return r;
}

StageResult Pipeline::toy_train(const StageInputs& in) {
  const auto started = utc_now();
  StageResult r;
  const fs::path pairs_path = in.corpus.value_or(out("train.pairs.jsonl"));
  r.inputs.push_back(pairs_path);
  const auto pairs = pairgen::load_pairs(pairs_path);
  if (pairs.empty()) throw InvalidArgument("toy-train: no training pairs in " + pairs_path.string());

  auto policy = losses::ToyPolicy::from_pairs(pairs, config_.training.dim, config_.seed, config_.training.distractors);
  std::optional<losses::ToyPolicy> reference;
  if (losses::needs_reference(config_.training.objective)) reference = policy;
  const auto result = losses::toy_train(policy, pairs, config_.training.objective, config_.training.steps,
                                        config_.training.lr, config_.hyperparams, reference);
  const auto name = "toy-train." + std::string(losses::to_string(config_.training.objective)) + ".csv";
  util::write_text(out(name), losses::trajectory_csv(result.trajectory));
  r.outputs.push_back(out(name));
  const auto& first = result.trajectory.front();
  const auto& last = result.trajectory.back();
  r.summary = {{"objective", losses::to_string(config_.training.objective)},
               {"steps", static_cast<int>(result.trajectory.size()) - 1},
               {"diverged", result.diverged},
               {"clamped", result.clamped},
               {"logp_w", {first.mean_logp_w, last.mean_logp_w}},
               {"logp_l", {first.mean_logp_l, last.mean_logp_l}},
               {"loss", {first.loss, last.loss}}};
  finish("toy-train", started, r);
  return r;
}

std::vector<Sample> Pipeline::default_eval_samples(std::vector<fs::path>& inputs) {
  inputs.push_back(out("curated.jsonl"));
  inputs.push_back(out("test.pairs.jsonl"));
  const auto samples = load_corpus(out("curated.jsonl"));
  const auto test = pairgen::load_pairs(out("test.pairs.jsonl"));
  std::map<std::string, const Sample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;
  std::vector<Sample> out_samples;
  for (const auto& p : test) {
    auto it = by_id.find(p.sample_id);
    if (it == by_id.end()) throw InvalidArgument("test pair refers to unknown sample: " + p.sample_id);
    out_samples.push_back(*it->second);
  }
  return out_samples;
}

std::string Pipeline::tag_for(const StageInputs& in) const {
  if (in.tag) return safe_name(*in.tag);
  return safe_name(config_.model.name + "." + std::string(evaluation::to_string(config_.evaluation.mode)));
}

StageResult Pipeline::evaluate(const StageInputs& in) {
  const auto started = utc_now();
  StageResult r;
  std::vector<Sample> samples;
  std::string dataset;
  if (in.corpus) {
    r.inputs.push_back(*in.corpus);
    samples = load_corpus(*in.corpus);
    dataset = in.corpus->stem().string();
  } else {
    samples = default_eval_samples(r.inputs);
    dataset = "test";
  }
  std::vector<probing::ProbeRecord> records;
  if (config_.evaluation.mode != evaluation::EvalMode::kRefusalOnlyOod) {
    const fs::path probe_path = in.probe.value_or(out("probe.jsonl"));
    r.inputs.push_back(probe_path);
    records = probing::load_probe_records(probe_path);
  }
  const auto run = evaluation::evaluate_corpus(samples, records, model(), config_.evaluation, config_.refusal,
                                               config_.verify, judge(), dataset);
  const std::string tag = tag_for(in);
  const auto report_path = out("eval." + tag + ".json");
  util::write_json(report_path, evaluation::to_json(run.report));
  evaluation::save_outcomes(out("eval." + tag + ".outcomes.jsonl"), run.outcomes);
  util::write_text(out("eval." + tag + ".md"), evaluation::report_markdown(run.report));
  r.outputs = {report_path, out("eval." + tag + ".outcomes.jsonl"), out("eval." + tag + ".md")};
  r.summary = evaluation::to_json(run.report);
  finish("evaluate", started, r);
  return r;
}

StageResult Pipeline::uncertainty(const StageInputs& in) {
  const auto started = utc_now();
  StageResult r;
  std::vector<Sample> samples;
  if (in.corpus) {
    r.inputs.push_back(*in.corpus);
    samples = load_corpus(*in.corpus);
  } else {
    samples = default_eval_samples(r.inputs);
  }
  const fs::path probe_path = in.probe.value_or(out("probe.jsonl"));
  r.inputs.push_back(probe_path);
  const auto records = probing::load_probe_records(probe_path);

  const auto unc = uncertainty::probe_uncertainty(samples, records, model(), config_.refusal);
  const auto summary = uncertainty::summarize(unc, records);
  const std::string tag = in.tag ? safe_name(*in.tag) : safe_name(config_.model.name);
  uncertainty::save_uncertainty_records(out("uncertainty." + tag + ".jsonl"), unc);
  util::write_json(out("uncertainty." + tag + ".summary.json"), summary.to_json());
  util::write_text(out("uncertainty." + tag + ".md"), summary.markdown());
  r.outputs = {out("uncertainty." + tag + ".jsonl"), out("uncertainty." + tag + ".summary.json"),
               out("uncertainty." + tag + ".md")};
  r.summary = summary.to_json();
  r.summary["max_identity_deviation"] = uncertainty::max_identity_deviation(unc);
  finish("uncertainty", started, r);
  return r;
}

}  // namespace kbound::pipeline
