#include "kbound/pipeline/config.hpp"

#include <cmath>
#include <cstdlib>
#include <regex>

#include "kbound/errors.hpp"
#include "kbound/util/hash.hpp"
#include "kbound/util/jsonl.hpp"

namespace kbound::pipeline {

using nlohmann::json;

namespace {

std::string interpolate_string(const std::string& s) {
  static const std::regex kVar(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
  std::string out;
  auto begin = std::sregex_iterator(s.begin(), s.end(), kVar);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const std::string name = m[1].str();
    const char* value = std::getenv(name.c_str());
    if (value == nullptr) throw ConfigurationError("environment variable not set: " + name);
    out.append(s, last, static_cast<std::size_t>(m.position(0)) - last);
    out += value;
    last = static_cast<std::size_t>(m.position(0) + m.length(0));
  }
  out.append(s, last, std::string::npos);
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

gateway::ModelEndpoint endpoint_at(const json& j, const std::filesystem::path& base, const char* role) {
  try {
    auto e = gateway::endpoint_from_json(j);
    if (e.kind == gateway::EndpointKind::kMock && !e.mock_source.empty()) {
      e.mock_source = resolve(base, e.mock_source).string();
    }
    e.validate();
    return e;
  } catch (const json::exception& ex) {
    throw ConfigurationError(std::string("endpoints.") + role + ": " + ex.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& ex) {
    throw ConfigurationError(std::string("config key '") + key + "': " + ex.what());
  }
}

const json& section(const json& doc, const char* key) {
  static const json kEmpty = json::object();
  if (!doc.contains(key)) return kEmpty;
  if (!doc.at(key).is_object()) throw ConfigurationError(std::string("config section '") + key + "' must be an object");
  return doc.at(key);
}

pairgen::Confidence confidence_from_string(const std::string& s) {
  if (s == "sum-logprob") return pairgen::Confidence::kSumLogprob;
  if (s == "mean-token-logprob") return pairgen::Confidence::kMeanTokenLogprob;
  throw ConfigurationError("unknown confidence measure: " + s);
}

}  // namespace

json interpolate_env(const json& doc) {
  if (doc.is_string()) return interpolate_string(doc.get<std::string>());
  if (doc.is_object()) {
    json out = json::object();
    for (auto it = doc.begin(); it != doc.end(); ++it) out[it.key()] = interpolate_env(it.value());
    return out;
  }
  if (doc.is_array()) {
    json out = json::array();
    for (const auto& v : doc) out.push_back(interpolate_env(v));
    return out;
  }
  return doc;
}

void apply_override(json& doc, std::string_view dotted_path, std::string_view value) {
  if (dotted_path.empty()) throw ConfigurationError("empty override key");
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted_path.find('.', start);
    const std::string key(dotted_path.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (key.empty()) throw ConfigurationError("malformed override key: " + std::string(dotted_path));
    if (!node->is_object()) *node = json::object();
    if (dot == std::string_view::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(std::string(value)) : parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

void PipelineConfig::validate() const {
  probing.validate();
  hyperparams.validate();
  refusal.validate();
  evaluation.validate();
  if (!(split.known_fraction >= 0.0 && split.known_fraction <= 1.0)) {
    throw ConfigurationError("split.known_fraction must lie in [0, 1]");
  }
  if (split.train == 0 && split.test == 0) throw ConfigurationError("split sizes are both zero");
  if (training.steps < 0 || training.steps > 1000000) throw ConfigurationError("training.steps out of range");
  if (!(training.lr > 0.0) || !std::isfinite(training.lr)) throw ConfigurationError("training.lr must be > 0");
  if (training.dim == 0 || training.dim > 4096) throw ConfigurationError("training.dim must lie in [1, 4096]");
  if (verify.policy.mode == probing::MatchMode::kJudge && !judge) {
    throw ConfigurationError("matching.mode is judge but no judge endpoint is configured");
  }
  if (verify.judge_refusal && !judge) {
    throw ConfigurationError("matching.judge_refusal needs a judge endpoint");
  }
}

PipelineConfig config_from_json(const json& raw, const std::filesystem::path& base_dir) {
  if (!raw.is_object()) throw ConfigurationError("config must be a JSON object");
  const json doc = interpolate_env(raw);
  PipelineConfig c;
  c.effective = raw;
  c.hash = util::sha256_hex(util::canonical_dump(doc));

  const json& endpoints = section(doc, "endpoints");
  if (!endpoints.contains("model")) throw ConfigurationError("endpoints.model is required");
  c.model = endpoint_at(endpoints.at("model"), base_dir, "model");
  if (endpoints.contains("reference")) c.reference = endpoint_at(endpoints.at("reference"), base_dir, "reference");
  if (endpoints.contains("judge")) c.judge = endpoint_at(endpoints.at("judge"), base_dir, "judge");

  c.seed = get_or<std::uint64_t>(doc, "seed", 0);

  const json& cur = section(doc, "curation");
  c.curation_passthrough = get_or(cur, "passthrough", false);
  c.rubric.prompt = get_or(cur, "rubric_prompt", c.rubric.prompt);
  c.rubric.reprompt_suffix = get_or(cur, "reprompt_suffix", c.rubric.reprompt_suffix);

  const json& probe = section(doc, "probing");
  c.probing.n = get_or(probe, "n", c.probing.n);
  c.probing.temperature = get_or(probe, "temperature", c.probing.temperature);
  c.probing.tau = get_or(probe, "tau", c.probing.tau);
  c.probing.seed = c.seed;

  const json& match = section(doc, "matching");
  try {
    c.verify.policy.mode = probing::match_mode_from_string(get_or<std::string>(match, "mode", "normalized-exact"));
  } catch (const InvalidArgument& e) {
    throw ConfigurationError(e.what());
  }
  c.verify.judge_refusal = get_or(match, "judge_refusal", false);
  c.probing.policy = c.verify.policy;

  const json& pg = section(doc, "pairgen");
  c.pairs.confidence = confidence_from_string(get_or<std::string>(pg, "confidence", "sum-logprob"));
  c.pairs.prefer_ground_truth = get_or(pg, "prefer_ground_truth", false);
  if (doc.contains("refusal")) c.refusal = pairgen::refusal_template_from_json(doc.at("refusal"));

  const json& split = section(doc, "split");
  c.split.train = get_or(split, "train", c.split.train);
  c.split.test = get_or(split, "test", c.split.test);
  c.split.known_fraction = get_or(split, "known_fraction", c.split.known_fraction);

  const json& hp = section(doc, "hyperparams");
  c.hyperparams.beta = get_or(hp, "beta", c.hyperparams.beta);
  c.hyperparams.lambda_or = get_or(hp, "lambda_or", c.hyperparams.lambda_or);
  c.hyperparams.lambda_nll = get_or(hp, "lambda_nll", c.hyperparams.lambda_nll);
  try {
    c.hyperparams.odds_mode = losses::odds_mode_from_string(get_or<std::string>(hp, "odds_mode", "length-normalized"));
    const json& tr = section(doc, "training");
    c.training.objective = losses::objective_from_string(get_or<std::string>(tr, "objective", "orpo"));
    c.training.steps = get_or(tr, "steps", c.training.steps);
    c.training.lr = get_or(tr, "lr", c.training.lr);
    c.training.dim = get_or(tr, "dim", c.training.dim);
    c.training.distractors = get_or(tr, "distractors", c.training.distractors);
    if (doc.contains("evaluation")) c.evaluation = evaluation::eval_setting_from_json(doc.at("evaluation"));
  } catch (const InvalidArgument& e) {
    throw ConfigurationError(e.what());
  }

  const json& paths = section(doc, "paths");
  c.paths.corpus = resolve(base_dir, get_or<std::string>(paths, "corpus", ""));
  c.paths.out_dir = resolve(base_dir, get_or<std::string>(paths, "out_dir", "out"));
  c.paths.cache_dir = resolve(base_dir, get_or<std::string>(paths, "cache_dir", ".kbound-cache"));

  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigurationError(e.what());
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::string>>& overrides) {
  json doc;
  try {
    doc = util::read_json(path);
  } catch (const IoError& e) {
    throw ConfigurationError(e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigurationError(e.what());
  }
  for (const auto& [key, value] : overrides) apply_override(doc, key, value);
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return config_from_json(doc, base);
}

}  // namespace kbound::pipeline
