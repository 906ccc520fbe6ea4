#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "kbound/errors.hpp"
#include "kbound/evaluation/quadrants.hpp"
#include "kbound/evaluation/reports.hpp"
#include "kbound/losses/objectives.hpp"
#include "kbound/pairgen/pairgen.hpp"
#include "kbound/probing/matching.hpp"
#include "kbound/probing/probing.hpp"
#include "kbound/uncertainty/uncertainty.hpp"
#include "kbound/util/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace kbound {
namespace {

/// Runs `prop` for `trials` derived seeds and reports the first failing seed.
void for_all(const char* name, int trials, const std::function<void(std::mt19937_64&)>& prop) {
  for (int t = 0; t < trials; ++t) {
    const auto seed = util::derive_seed(0x5eed, name, static_cast<std::uint64_t>(t));
    std::mt19937_64 rng(seed);
    SCOPED_TRACE(::testing::Message() << name << " trial " << t << " seed " << seed);
    prop(rng);
    if (::testing::Test::HasFailure()) return;
  }
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * util::canonical(rng); }
std::size_t below(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(util::bounded(rng, n)); }

std::vector<evaluation::QuadrantOutcome> random_outcomes(std::mt19937_64& rng, std::size_t n) {
  std::vector<evaluation::QuadrantOutcome> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].sample_id = "r" + std::to_string(i);
    out[i].mastery = below(rng, 2) ? Mastery::kKnown : Mastery::kUnknown;
    out[i].verdict = static_cast<evaluation::Verdict>(below(rng, 3));
    out[i].bucket = evaluation::bucket_for(out[i].mastery, out[i].verdict);
  }
  return out;
}

TEST(Properties, BucketsPartitionAndTruthfulIdentity) {
  for_all("partition", 300, [](std::mt19937_64& rng) {
    const auto outs = random_outcomes(rng, 1 + below(rng, 400));
    const auto r = evaluation::compute_metrics(outs);
    std::size_t sum = 0;
    for (auto c : r.counts) sum += c;
    EXPECT_EQ(sum, outs.size());
    EXPECT_EQ(r.truthful, r.rho_ik + r.rho_idk);
    EXPECT_NEAR(r.rho_ik + r.rho_idk + r.tax + r.hallucination + r.wrong_on_known, 1.0, 1e-9);
    EXPECT_EQ(r.known + r.unknown, outs.size());
  });
}

TEST(Properties, MetricsArePermutationInvariant) {
  for_all("permutation", 100, [](std::mt19937_64& rng) {
    auto outs = random_outcomes(rng, 1 + below(rng, 200));
    const auto a = evaluation::compute_metrics(outs);
    util::portable_shuffle(outs.begin(), outs.end(), rng);
    const auto b = evaluation::compute_metrics(outs);
    EXPECT_EQ(a.counts, b.counts);
    EXPECT_EQ(a.rho_ik, b.rho_ik);
    EXPECT_EQ(a.rho_idk, b.rho_idk);
  });
}

TEST(Properties, RaisingTauOnlyMovesKnownToUnknown) {
  for_all("tau", 100, [](std::mt19937_64& rng) {
    const std::size_t n = 1 + below(rng, 100);
    std::vector<int> correct(n);
    std::vector<evaluation::Verdict> verdicts(n);
    for (std::size_t i = 0; i < n; ++i) {
      correct[i] = static_cast<int>(below(rng, 11));
      verdicts[i] = static_cast<evaluation::Verdict>(below(rng, 3));
    }
    const double lo = uniform(rng, 0.05, 0.95);
    const double hi = uniform(rng, lo, 1.0);
    auto outcomes_at = [&](double tau) {
      std::vector<evaluation::QuadrantOutcome> outs(n);
      for (std::size_t i = 0; i < n; ++i) {
        outs[i].mastery = probing::label_for(correct[i], 10, tau);
        outs[i].verdict = verdicts[i];
        outs[i].bucket = evaluation::bucket_for(outs[i].mastery, verdicts[i]);
      }
      return outs;
    };
    const auto a = outcomes_at(lo);
    const auto b = outcomes_at(hi);
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i].mastery == Mastery::kUnknown) EXPECT_EQ(b[i].mastery, Mastery::kUnknown);
    }
    EXPECT_EQ(evaluation::compute_metrics(a).rho_ik, evaluation::compute_metrics(b).rho_ik);
  });
}

TEST(Properties, CanonicalRefusalAlwaysVerifies) {
  const std::vector<std::string> phrases{"i don't know", "i do not know", "beyond my knowledge", "i'm not sure",
                                         "cannot answer"};
  for_all("canonical", 100, [&](std::mt19937_64& rng) {
    pairgen::RefusalTemplate t;
    const auto& p = phrases[below(rng, phrases.size())];
    std::string canonical = p;
    canonical[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(canonical[0])));
    t.canonical = (below(rng, 2) ? "Sorry, " : "") + canonical + ".";
    ASSERT_NO_THROW(t.validate());
    EXPECT_TRUE(evaluation::verify(t.canonical, evaluation::RefusalTarget{}, t));
  });
}

TEST(Properties, NormalizationIsIdempotent) {
  const std::string alphabet = "abcXYZ  ,.!?'-\tthe an a";
  const auto rules = probing::MatchPolicy::default_rules();
  for_all("normalize", 500, [&](std::mt19937_64& rng) {
    std::string s;
    for (std::size_t i = 0, n = below(rng, 30); i < n; ++i) s += alphabet[below(rng, alphabet.size())];
    const auto once = probing::normalize_answer(s, rules);
    EXPECT_EQ(probing::normalize_answer(once, rules), once) << '"' << s << '"';
  });
}

TEST(Properties, PairsNeverEqualAndRespectBranch) {
  const pairgen::RefusalTemplate tmpl;
  for_all("pairs", 200, [&](std::mt19937_64& rng) {
    const auto s = testing::make_sample("x", "q", "truth");
    probing::ProbeRecord rec;
    rec.sample_id = "x";
    rec.n = 10;
    int correct = 0;
    for (int i = 0; i < rec.n; ++i) {
      const bool ok = below(rng, 2) != 0;
      gateway::SampledResponse r;
      r.text = ok ? (below(rng, 2) ? "truth" : "Truth.") : (below(rng, 4) ? "guess " + std::to_string(below(rng, 3)) : "I don't know");
      r.total_logprob = -uniform(rng, 0.0, 5.0);
      r.sample_index = i;
      rec.responses.push_back({r, ok});
      correct += ok;
    }
    rec.accuracy = correct / 10.0;
    rec.label = probing::label_for(correct, 10, 0.7);
    pairgen::PreferencePair p;
    try {
      p = pairgen::build_pair(rec, s, tmpl);
    } catch (const InternalInconsistency&) {
      // Unknown record whose only incorrect draws are refusals.
      EXPECT_EQ(rec.label, Mastery::kUnknown);
      return;
    }
    EXPECT_NE(p.chosen, p.rejected);
    if (p.branch == pairgen::Branch::kKnown) {
      EXPECT_TRUE(probing::match_answer(p.chosen, s.ground_truth, {}));
      EXPECT_EQ(p.rejected, tmpl.canonical);
    } else {
      EXPECT_FALSE(probing::match_answer(p.rejected, s.ground_truth, {}));
      EXPECT_FALSE(tmpl.detects(p.rejected));
      EXPECT_EQ(p.chosen, tmpl.canonical);
      EXPECT_TRUE(std::any_of(rec.responses.begin(), rec.responses.end(),
                              [&](const auto& r) { return r.response.text == p.rejected; }));
    }
  });
}

TEST(Properties, SplitIsDeterministicDisjointAndStratified) {
  for_all("split", 50, [](std::mt19937_64& rng) {
    const std::size_t known = 40 + below(rng, 80), unknown = 40 + below(rng, 80);
    std::vector<pairgen::PreferencePair> pool;
    for (std::size_t i = 0; i < known + unknown; ++i) {
      pairgen::PreferencePair p;
      p.sample_id = "p" + std::to_string(i);
      p.branch = i < known ? pairgen::Branch::kKnown : pairgen::Branch::kUnknown;
      p.chosen = "c" + std::to_string(i);
      p.rejected = "r" + std::to_string(i);
      pool.push_back(p);
    }
    const double kf = uniform(rng, 0.3, 0.7);
    const std::size_t train = 10 + below(rng, 20), test = 5 + below(rng, 10);
    const auto seed = rng();
    const auto a = pairgen::split_dataset(pool, train, test, kf, seed);
    const auto b = pairgen::split_dataset(pool, train, test, kf, seed);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    std::set<std::string> ids;
    for (const auto& p : a.train) ids.insert(p.sample_id);
    for (const auto& p : a.test) EXPECT_TRUE(ids.insert(p.sample_id).second);
    const auto expect_known = static_cast<double>(std::llround(kf * static_cast<double>(train)));
    EXPECT_NEAR(pairgen::known_fraction(a.train) * static_cast<double>(train), expect_known, 1e-9);
  });
}

TEST(Properties, LossGradientsMatchFiniteDifferences) {
  for_all("loss-grad", 100, [](std::mt19937_64& rng) {
    losses::LossBatch batch(1 + below(rng, 6));
    for (auto& p : batch) {
      p.logp_w_policy = -uniform(rng, 0.05, 8.0);
      p.logp_l_policy = -uniform(rng, 0.05, 8.0);
      p.logp_w_ref = -uniform(rng, 0.05, 8.0);
      p.logp_l_ref = -uniform(rng, 0.05, 8.0);
      p.len_w = 1 + static_cast<int>(below(rng, 5));
      p.len_l = 1 + static_cast<int>(below(rng, 5));
    }
    losses::Hyperparams hp;
    hp.beta = uniform(rng, 0.01, 2.0);
    hp.lambda_or = uniform(rng, 0.0, 2.0);
    hp.lambda_nll = uniform(rng, 0.0, 2.0);
    for (auto obj : losses::kAllObjectives) {
      const auto r = losses::evaluate(obj, batch, hp);
      EXPECT_GE(r.value, 0.0);
      const std::size_t i = below(rng, batch.size());
      auto up = batch, down = batch;
      up[i].logp_w_policy += 1e-6;
      down[i].logp_w_policy -= 1e-6;
      const double fd = (losses::evaluate(obj, up, hp).value - losses::evaluate(obj, down, hp).value) / 2e-6;
      EXPECT_NEAR(r.d_logp_w[i], fd, 1e-6 * std::max(1.0, std::abs(fd))) << losses::to_string(obj);
    }
  });
}

TEST(Properties, DpoMatchesOracleAndIsMonotoneInMargin) {
  for_all("dpo", 200, [](std::mt19937_64& rng) {
    const double lw = -uniform(rng, 0, 6), ll = -uniform(rng, 0, 6), rw = -uniform(rng, 0, 6),
                 rl = -uniform(rng, 0, 6), beta = uniform(rng, 0.01, 3.0);
    losses::Hyperparams hp;
    hp.beta = beta;
    losses::PairLogprobs p{lw, ll, rw, rl, 1, 1};
    EXPECT_NEAR(losses::dpo_loss({p}, hp), oracle::dpo_term(lw, ll, rw, rl, beta), 1e-10);
    auto better = p;
    better.logp_l_policy -= uniform(rng, 0.01, 1.0);
    EXPECT_LT(losses::dpo_loss({better}, hp), losses::dpo_loss({p}, hp));
  });
}

TEST(Properties, PplIdentity) {
  for_all("ppl", 500, [](std::mt19937_64& rng) {
    const double m = -uniform(rng, 0.0, 20.0);
    EXPECT_NEAR(uncertainty::ppl_from_mean_logprob(m), oracle::ppl(m), 1e-9 * oracle::ppl(m));
    EXPECT_GE(uncertainty::ppl_from_mean_logprob(m), 1.0);
  });
}

}  // namespace
}  // namespace kbound
