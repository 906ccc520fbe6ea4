#include "kbound/losses/objectives.hpp"

#include <cmath>
#include <string>

#include "kbound/errors.hpp"
#include "kbound/util/jsonl.hpp"

namespace kbound::losses {

std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::kSft: return "sft";
    case Objective::kDpo: return "dpo";
    case Objective::kCpo: return "cpo";
    case Objective::kOrpo: return "orpo";
  }
  return "?";
}

Objective objective_from_string(std::string_view s) {
  for (auto o : kAllObjectives) {
    if (to_string(o) == s) return o;
  }
  throw ConfigurationError("unknown objective: " + std::string(s));
}

std::string_view to_string(OddsMode m) {
  return m == OddsMode::kRaw ? "raw" : "length-normalized";
}

OddsMode odds_mode_from_string(std::string_view s) {
  if (s == "raw") return OddsMode::kRaw;
  if (s == "length-normalized") return OddsMode::kLengthNormalized;
  throw ConfigurationError("unknown odds mode: " + std::string(s));
}

void Hyperparams::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigurationError("beta must be > 0");
  if (!(lambda_or >= 0.0) || !std::isfinite(lambda_or)) throw ConfigurationError("lambda_or must be >= 0");
  if (!(lambda_nll >= 0.0) || !std::isfinite(lambda_nll)) {
    throw ConfigurationError("lambda_nll must be >= 0");
  }
}

double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

const double kClampLogp = std::log1p(-kOddsClamp);

// d/dlogp of log-odds, i.e. 1 / (1 - p); zero where the clamp is active.
double log_odds_slope(double logp) {
  if (logp >= kClampLogp) return 0.0;
  return 1.0 / -std::expm1(logp);
}

constexpr double kLogpTolerance = 1e-9;

void check_batch(const LossBatch& batch, bool require_reference) {
  if (batch.empty()) throw EmptyBatch();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& p = batch[i];
    const std::string where = "pair " + std::to_string(i) + ": ";
    if (!std::isfinite(p.logp_w_policy) || !std::isfinite(p.logp_l_policy) ||
        p.logp_w_policy > kLogpTolerance || p.logp_l_policy > kLogpTolerance) {
      throw InvalidArgument(where + "policy log-probabilities must be finite and <= 0");
    }
    if (p.len_w < 1 || p.len_l < 1) throw InvalidArgument(where + "token counts must be >= 1");
    if (p.logp_w_ref.has_value() != p.logp_l_ref.has_value()) {
      throw InvalidArgument(where + "reference log-probabilities must come together");
    }
    if (require_reference && !p.logp_w_ref) {
      throw MissingReference(where + "objective needs reference log-probabilities");
    }
  }
}

LossResult zeros(std::size_t n) {
  LossResult r;
  r.d_logp_w.assign(n, 0.0);
  r.d_logp_l.assign(n, 0.0);
  return r;
}

void add_sft(const LossBatch& batch, double weight, LossResult& r) {
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    r.value += -batch[i].logp_w_policy * inv * weight;
    r.d_logp_w[i] += -inv * weight;
  }
}

// mean(-log sig(beta * margin_i)) where margin = (lw - ll) + offset_i.
void add_sigmoid_margin(const LossBatch& batch, double beta, bool with_reference, LossResult& r) {
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& p = batch[i];
    double margin = p.logp_w_policy - p.logp_l_policy;
    if (with_reference) margin -= *p.logp_w_ref - *p.logp_l_ref;
    const double z = beta * margin;
    r.value += -log_sigmoid(z) * inv;
    const double g = beta * sigmoid(-z) * inv;
    r.d_logp_w[i] += -g;
    r.d_logp_l[i] += g;
  }
}

}  // namespace

double log_odds(double logp, bool* clamped) {
  if (clamped) *clamped = false;
  if (logp >= kClampLogp) {
    logp = kClampLogp;
    if (clamped) *clamped = true;
  }
  return logp - std::log(-std::expm1(logp));
}

double odds_ratio_term(double log_pw, double log_pl) {
  return -log_sigmoid(log_odds(log_pw) - log_odds(log_pl));
}

bool needs_reference(Objective objective) { return objective == Objective::kDpo; }

LossResult evaluate(Objective objective, const LossBatch& batch, const Hyperparams& hp) {
  hp.validate();
  check_batch(batch, needs_reference(objective));
  LossResult r = zeros(batch.size());
  switch (objective) {
    case Objective::kSft:
      add_sft(batch, 1.0, r);
      break;
    case Objective::kDpo:
      add_sigmoid_margin(batch, hp.beta, true, r);
      break;
    case Objective::kCpo:
      add_sigmoid_margin(batch, hp.beta, false, r);
      if (hp.lambda_nll > 0.0) add_sft(batch, hp.lambda_nll, r);
      break;
    case Objective::kOrpo: {
      add_sft(batch, 1.0, r);
      const double inv = 1.0 / static_cast<double>(batch.size());
      double or_sum = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& p = batch[i];
        const bool normalized = hp.odds_mode == OddsMode::kLengthNormalized;
        const double scale_w = normalized ? 1.0 / p.len_w : 1.0;
        const double scale_l = normalized ? 1.0 / p.len_l : 1.0;
        const double lpw = p.logp_w_policy * scale_w;
        const double lpl = p.logp_l_policy * scale_l;
        bool cw = false;
        bool cl = false;
        const double ratio = log_odds(lpw, &cw) - log_odds(lpl, &cl);
        r.clamped += (cw ? 1 : 0) + (cl ? 1 : 0);
        or_sum += -log_sigmoid(ratio);
        const double g = hp.lambda_or * sigmoid(-ratio) * inv;
        r.d_logp_w[i] += -g * log_odds_slope(lpw) * scale_w;
        r.d_logp_l[i] += g * log_odds_slope(lpl) * scale_l;
      }
      r.value += hp.lambda_or * or_sum * inv;
      break;
    }
  }
  return r;
}

double sft_loss(const LossBatch& batch) { return evaluate(Objective::kSft, batch).value; }
double dpo_loss(const LossBatch& batch, const Hyperparams& hp) { return evaluate(Objective::kDpo, batch, hp).value; }
double cpo_loss(const LossBatch& batch, const Hyperparams& hp) { return evaluate(Objective::kCpo, batch, hp).value; }
double orpo_loss(const LossBatch& batch, const Hyperparams& hp) { return evaluate(Objective::kOrpo, batch, hp).value; }

LossBatch load_loss_batch(const std::filesystem::path& path) {
  LossBatch batch;
  for (const auto& j : util::read_jsonl(path)) {
    PairLogprobs p;
    p.logp_w_policy = j.at("logp_w_policy").get<double>();
    p.logp_l_policy = j.at("logp_l_policy").get<double>();
    if (j.contains("logp_w_ref") && !j["logp_w_ref"].is_null()) p.logp_w_ref = j["logp_w_ref"].get<double>();
    if (j.contains("logp_l_ref") && !j["logp_l_ref"].is_null()) p.logp_l_ref = j["logp_l_ref"].get<double>();
    p.len_w = j.value("len_w", 1);
    p.len_l = j.value("len_l", 1);
    batch.push_back(p);
  }
  return batch;
}

void save_loss_batch(const std::filesystem::path& path, const LossBatch& batch) {
  std::vector<nlohmann::json> rows;
  for (const auto& p : batch) {
    rows.push_back({{"logp_w_policy", p.logp_w_policy},
                    {"logp_l_policy", p.logp_l_policy},
                    {"logp_w_ref", p.logp_w_ref ? nlohmann::json(*p.logp_w_ref) : nlohmann::json(nullptr)},
                    {"logp_l_ref", p.logp_l_ref ? nlohmann::json(*p.logp_l_ref) : nlohmann::json(nullptr)},
                    {"len_w", p.len_w},
                    {"len_l", p.len_l}});
  }
  util::write_jsonl(path, rows);
}

}  // namespace kbound::losses
