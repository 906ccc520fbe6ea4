/// @file objectives.hpp
/// @brief SFT, DPO, CPO and ORPO objectives over sequence log-probabilities.
///
/// Every objective is the batch mean of a per-pair term and returns its
/// gradient with respect to each pair's policy log-probabilities, so callers
/// can chain-rule into any parameterization.
///
///   sft  = -mean(lw)
///   dpo  = mean(-log sig(beta * ((lw - rw) - (ll - rl))))
///   cpo  = mean(-log sig(beta * (lw - ll))) + lambda_nll * sft
///   orpo = sft + lambda_or * mean(-log sig(logodds(pw) - logodds(pl)))
///
/// where ORPO's p is exp(logp / tokens) by default, or exp(logp) in raw mode.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

namespace kbound::losses {

struct PairLogprobs {
  double logp_w_policy = 0.0;
  double logp_l_policy = 0.0;
  std::optional<double> logp_w_ref;
  std::optional<double> logp_l_ref;
  int len_w = 1;
  int len_l = 1;

  bool operator==(const PairLogprobs&) const = default;
};

using LossBatch = std::vector<PairLogprobs>;

enum class Objective { kSft, kDpo, kCpo, kOrpo };
std::string_view to_string(Objective o);
Objective objective_from_string(std::string_view s);
inline constexpr Objective kAllObjectives[] = {Objective::kSft, Objective::kDpo, Objective::kCpo,
                                               Objective::kOrpo};

enum class OddsMode { kLengthNormalized, kRaw };
std::string_view to_string(OddsMode m);
OddsMode odds_mode_from_string(std::string_view s);

struct Hyperparams {
  double beta = 0.1;
  double lambda_or = 1.0;
  double lambda_nll = 1.0;
  OddsMode odds_mode = OddsMode::kLengthNormalized;

  /// beta > 0, lambda_or >= 0, lambda_nll >= 0, all finite.
  void validate() const;
};

struct LossResult {
  double value = 0.0;
  std::vector<double> d_logp_w;
  std::vector<double> d_logp_l;
  /// ORPO pairs whose probability was clamped below 1 - 1e-12.
  std::size_t clamped = 0;
};

/// Probabilities at or above 1 - kOddsClamp are clamped before taking odds.
inline constexpr double kOddsClamp = 1e-12;

double log_sigmoid(double x);
double sigmoid(double x);

/// log(p / (1 - p)) from log p, clamping p below 1 - kOddsClamp.
double log_odds(double logp, bool* clamped = nullptr);

/// -log sig(logodds(pw) - logodds(pl)) for log-probabilities of the compared
/// events.
double odds_ratio_term(double log_pw, double log_pl);

LossResult evaluate(Objective objective, const LossBatch& batch, const Hyperparams& hp = {});

double sft_loss(const LossBatch& batch);
double dpo_loss(const LossBatch& batch, const Hyperparams& hp = {});
double cpo_loss(const LossBatch& batch, const Hyperparams& hp = {});
double orpo_loss(const LossBatch& batch, const Hyperparams& hp = {});

/// Whether the objective reads reference log-probabilities.
bool needs_reference(Objective objective);

LossBatch load_loss_batch(const std::filesystem::path& path);
void save_loss_batch(const std::filesystem::path& path, const LossBatch& batch);

}  // namespace kbound::losses
