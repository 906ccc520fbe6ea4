#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kbound/errors.hpp"
#include "kbound/losses/grad_check.hpp"
#include "kbound/losses/objectives.hpp"
#include "kbound/losses/toy_policy.hpp"
#include "kbound/losses/trainer.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace kbound::losses {
namespace {

PairLogprobs pair(double lw, double ll, std::optional<double> rw = std::nullopt,
                  std::optional<double> rl = std::nullopt) {
  PairLogprobs p;
  p.logp_w_policy = lw;
  p.logp_l_policy = ll;
  p.logp_w_ref = rw;
  p.logp_l_ref = rl;
  return p;
}

Hyperparams hp_with(double beta, double lambda_or = 1.0, double lambda_nll = 1.0) {
  Hyperparams h;
  h.beta = beta;
  h.lambda_or = lambda_or;
  h.lambda_nll = lambda_nll;
  return h;
}

TEST(Sft, ClosedForms) {
  EXPECT_DOUBLE_EQ(sft_loss({pair(0.0, -1.0)}), 0.0);
  EXPECT_DOUBLE_EQ(sft_loss({pair(-1.0, -1.0), pair(-3.0, -1.0)}), 2.0);
  EXPECT_NEAR(sft_loss({pair(std::log(0.25), -1.0)}), 1.3862943611198906, 1e-12);
}

TEST(Dpo, EqualRatiosGiveLn2) {
  for (double beta : {0.01, 0.1, 1.0, 5.0}) {
    EXPECT_NEAR(dpo_loss({pair(-1.0, -2.0, -1.0, -2.0)}, hp_with(beta)), std::log(2.0), 1e-12);
  }
}

TEST(Dpo, ClosedFormAndOracle) {
  const LossBatch b{pair(std::log(3.0) - 2.0, -1.0, -2.0, -1.0)};
  EXPECT_NEAR(dpo_loss(b, hp_with(1.0)), std::log(4.0 / 3.0), 1e-12);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-6.0, 0.0);
  for (int i = 0; i < 200; ++i) {
    const double lw = u(rng), ll = u(rng), rw = u(rng), rl = u(rng);
    EXPECT_NEAR(dpo_loss({pair(lw, ll, rw, rl)}, hp_with(0.3)), oracle::dpo_term(lw, ll, rw, rl, 0.3), 1e-10);
  }
}

TEST(Dpo, BetaMattersAndLossFallsWithMargin) {
  const LossBatch b{pair(-0.5, -2.0, -1.0, -1.0)};
  EXPECT_NE(dpo_loss(b, hp_with(0.1)), dpo_loss(b, hp_with(1.0)));
  double prev = INFINITY;
  for (double lw = -3.0; lw <= 0.0; lw += 0.5) {
    const double v = dpo_loss({pair(lw, -2.0, -1.0, -1.0)}, hp_with(0.5));
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Dpo, NeedsReference) {
  EXPECT_THROW(dpo_loss({pair(-1.0, -2.0)}), MissingReference);
  EXPECT_THROW(dpo_loss({pair(-1.0, -2.0, -1.0, std::nullopt)}), InvalidArgument);
}

TEST(Cpo, ClosedForms) {
  EXPECT_NEAR(cpo_loss({pair(-1.0, -1.0)}, hp_with(1.0, 1.0, 0.0)), std::log(2.0), 1e-12);
  const LossBatch b{pair(std::log(0.8), std::log(0.2))};
  EXPECT_NEAR(cpo_loss(b, hp_with(1.0, 1.0, 0.0)), std::log(5.0 / 4.0), 1e-12);
  EXPECT_NEAR(cpo_loss(b, hp_with(1.0, 1.0, 1.0)), 2.0 * std::log(5.0 / 4.0), 1e-12);
  EXPECT_NEAR(cpo_loss(b, hp_with(1.0, 1.0, 1.0)), 0.4463, 1e-4);
}

TEST(Orpo, OddsRatioClosedForms) {
  EXPECT_NEAR(odds_ratio_term(std::log(0.3), std::log(0.3)), std::log(2.0), 1e-12);
  EXPECT_NEAR(odds_ratio_term(std::log(0.8), std::log(0.2)), std::log(17.0 / 16.0), 1e-12);
  EXPECT_NEAR(odds_ratio_term(std::log(0.8), std::log(0.2)), oracle::odds_ratio_term(0.8, 0.2), 1e-12);
}

TEST(Orpo, LambdaZeroIsSft) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5.0, -0.01);
  LossBatch b;
  for (int i = 0; i < 16; ++i) b.push_back(pair(u(rng), u(rng)));
  EXPECT_EQ(orpo_loss(b, hp_with(0.1, 0.0)), sft_loss(b));
}

TEST(Orpo, LengthNormalization) {
  PairLogprobs p = pair(2.0 * std::log(0.8), 2.0 * std::log(0.2));
  p.len_w = 2;
  p.len_l = 2;
  Hyperparams h = hp_with(0.1, 1.0);
  const double expect = -p.logp_w_policy + std::log(17.0 / 16.0);
  EXPECT_NEAR(orpo_loss({p}, h), expect, 1e-12);
  h.odds_mode = OddsMode::kRaw;
  EXPECT_NEAR(orpo_loss({p}, h), -p.logp_w_policy + oracle::odds_ratio_term(0.64, 0.04), 1e-12);
}

TEST(Orpo, ClampNearCertainty) {
  bool clamped = false;
  const double v = log_odds(0.0, &clamped);
  EXPECT_TRUE(clamped);
  EXPECT_TRUE(std::isfinite(v));
  const auto r = evaluate(Objective::kOrpo, {pair(0.0, -1.0)});
  EXPECT_EQ(r.clamped, 1u);
  EXPECT_TRUE(std::isfinite(r.value));
}

TEST(Batch, Validation) {
  EXPECT_THROW(sft_loss({}), EmptyBatch);
  EXPECT_THROW(sft_loss({pair(0.5, -1.0)}), InvalidArgument);
  EXPECT_THROW(sft_loss({pair(NAN, -1.0)}), InvalidArgument);
  PairLogprobs p = pair(-1.0, -1.0);
  p.len_w = 0;
  EXPECT_THROW(orpo_loss({p}), InvalidArgument);
  EXPECT_THROW(Hyperparams{.beta = 0.0}.validate(), ConfigurationError);
}

TEST(Batch, JsonRoundTrip) {
  testing::TempDir dir;
  const LossBatch b{pair(-1.0, -2.0, -1.5, -2.5), pair(-0.5, -0.7)};
  save_loss_batch(dir / "b.jsonl", b);
  EXPECT_EQ(load_loss_batch(dir / "b.jsonl"), b);
}

TEST(Gradients, AnalyticMatchesFiniteDifferenceOnLogprobs) {
  const LossBatch b{pair(-1.2, -0.4, -1.0, -0.9), pair(-0.3, -2.2, -0.5, -1.0)};
  for (auto obj : kAllObjectives) {
    const auto r = evaluate(obj, b, hp_with(0.7, 0.5, 0.3));
    for (std::size_t i = 0; i < b.size(); ++i) {
      for (int side = 0; side < 2; ++side) {
        auto plus = b;
        auto minus = b;
        const double h = 1e-6;
        (side == 0 ? plus[i].logp_w_policy : plus[i].logp_l_policy) += h;
        (side == 0 ? minus[i].logp_w_policy : minus[i].logp_l_policy) -= h;
        const double fd =
            (evaluate(obj, plus, hp_with(0.7, 0.5, 0.3)).value - evaluate(obj, minus, hp_with(0.7, 0.5, 0.3)).value) /
            (2 * h);
        EXPECT_NEAR(side == 0 ? r.d_logp_w[i] : r.d_logp_l[i], fd, 1e-7) << to_string(obj);
      }
    }
  }
}

ToyPolicy five_param_policy() {
  return ToyPolicy({{"p0", {"a", "b c", "d"}}, {"p1", {"e", "f", "g h i"}}}, 5, 11);
}

TEST(ToyPolicyTest, LogprobsNormalizeAndGradMatchesFd) {
  const auto pol = five_param_policy();
  for (std::size_t p = 0; p < pol.prompt_count(); ++p) {
    double total = 0.0;
    for (std::size_t r = 0; r < pol.prompt(p).responses.size(); ++r) total += std::exp(pol.logprob(p, r));
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  auto theta = std::vector<double>(pol.theta().begin(), pol.theta().end());
  const auto g = pol.logprob_grad(1, 2);
  for (std::size_t k = 0; k < theta.size(); ++k) {
    auto tp = theta, tm = theta;
    tp[k] += 1e-6;
    tm[k] -= 1e-6;
    ToyPolicy a = pol, b = pol;
    a.set_theta(tp);
    b.set_theta(tm);
    EXPECT_NEAR(g[k], (a.logprob(1, 2) - b.logprob(1, 2)) / 2e-6, 1e-8);
  }
  EXPECT_EQ(pol.token_count(1, 2), 3);
}

TEST(GradCheck, AllObjectivesOnFiveParameterToy) {
  const auto pol = five_param_policy();
  ToyPolicy ref = pol;
  auto t = std::vector<double>(pol.theta().begin(), pol.theta().end());
  for (auto& v : t) v *= 0.5;
  ref.set_theta(t);
  const std::vector<ToyPairIndex> pairs{{0, 0, 1}, {1, 2, 0}};
  for (auto obj : kAllObjectives) {
    const auto r = grad_check(obj, pol, &ref, pairs);
    EXPECT_FALSE(r.skipped);
    EXPECT_EQ(r.coordinates, 5u);
    EXPECT_LE(r.max_relative_error, 1e-4) << to_string(obj);
  }
}

TEST(GradCheck, OrpoNearClampIsSkippedAndReported) {
  ToyPolicy pol({{"p", {"a", "b"}}}, 1, 0);
  pol.set_theta({1e4});
  const auto sign = pol.logprob(0, 0) > pol.logprob(0, 1) ? 0u : 1u;
  const auto r = grad_check(Objective::kOrpo, pol, nullptr, {{0, sign, 1 - sign}});
  EXPECT_TRUE(r.skipped);
  EXPECT_FALSE(r.note.empty());
}

std::vector<pairgen::PreferencePair> toy_pairs(std::size_t n) {
  std::vector<pairgen::PreferencePair> out;
  for (std::size_t i = 0; i < n; ++i) {
    pairgen::PreferencePair p;
    p.sample_id = "t" + std::to_string(i);
    p.prompt = "question " + std::to_string(i);
    p.chosen = i % 2 ? "answer " + std::to_string(i) : "I don't know.";
    p.rejected = i % 2 ? "I don't know." : "guess " + std::to_string(i);
    p.branch = i % 2 ? pairgen::Branch::kKnown : pairgen::Branch::kUnknown;
    p.chosen_source = i % 2 ? pairgen::ChosenSource::kModelCorrect : pairgen::ChosenSource::kRefusal;
    p.rejected_source = i % 2 ? pairgen::RejectedSource::kRefusal : pairgen::RejectedSource::kModelIncorrect;
    out.push_back(p);
  }
  return out;
}

TEST(ToyTrain, EveryObjectiveSeparatesChosenFromRejected) {
  const auto pairs = toy_pairs(10);
  for (auto obj : kAllObjectives) {
    auto pol = ToyPolicy::from_pairs(pairs, 16, 5);
    std::optional<ToyPolicy> ref;
    if (needs_reference(obj)) ref = pol;
    const auto r = toy_train(pol, pairs, obj, 500, 0.1, {}, ref);
    ASSERT_EQ(r.trajectory.size(), 501u);
    EXPECT_FALSE(r.diverged);
    EXPECT_GT(r.trajectory.back().mean_logp_w, r.trajectory.front().mean_logp_w) << to_string(obj);
    EXPECT_LT(r.trajectory.back().mean_logp_l, r.trajectory.front().mean_logp_l) << to_string(obj);
  }
}

TEST(ToyTrain, ZeroStepsLeavesParameters) {
  const auto pairs = toy_pairs(4);
  auto pol = ToyPolicy::from_pairs(pairs, 8, 1);
  const std::vector<double> before(pol.theta().begin(), pol.theta().end());
  const auto r = toy_train(pol, pairs, Objective::kSft, 0, 0.1);
  EXPECT_EQ(r.trajectory.size(), 1u);
  EXPECT_EQ(std::vector<double>(pol.theta().begin(), pol.theta().end()), before);
}

TEST(ToyTrain, DpoWithoutReferenceThrows) {
  const auto pairs = toy_pairs(4);
  auto pol = ToyPolicy::from_pairs(pairs, 8, 1);
  EXPECT_THROW(toy_train(pol, pairs, Objective::kDpo, 10, 0.1), MissingReference);
}

TEST(ToyTrain, TrajectoryCsv) {
  const auto csv = trajectory_csv({{0, -1.0, -2.0, 0.5}});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,logp_w,logp_l,loss");
}

}  // namespace
}  // namespace kbound::losses
