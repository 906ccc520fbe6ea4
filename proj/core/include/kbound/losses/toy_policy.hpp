/// @file toy_policy.hpp
/// @brief Desk-scale differentiable policy used to exercise the objectives.
///
/// Each prompt owns a finite response set. The policy scores a response as
/// theta . phi(prompt, response) with fixed pseudo-random features phi and
/// normalizes with a softmax per prompt, so log-probabilities and their
/// gradients are available in closed form.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kbound/losses/objectives.hpp"
#include "kbound/pairgen/pairgen.hpp"

namespace kbound::losses {

struct ToyPrompt {
  std::string key;
  std::vector<std::string> responses;
};

/// A preference pair located inside a ToyPolicy.
struct ToyPairIndex {
  std::size_t prompt = 0;
  std::size_t chosen = 0;
  std::size_t rejected = 0;
};

class ToyPolicy {
 public:
  /// Features are uniform in [-1, 1), theta starts uniform in
  /// [-init_scale, init_scale); both streams derive from `seed`.
  ToyPolicy(std::vector<ToyPrompt> prompts, std::size_t dim, std::uint64_t seed,
            double init_scale = 0.5);

  /// One prompt per pair with responses {chosen, rejected, distractors...}.
  static ToyPolicy from_pairs(const std::vector<pairgen::PreferencePair>& pairs, std::size_t dim,
                              std::uint64_t seed, std::size_t distractors = 2);

  std::size_t dim() const { return theta_.size(); }
  std::size_t prompt_count() const { return prompts_.size(); }
  const ToyPrompt& prompt(std::size_t i) const { return prompts_.at(i); }

  std::span<const double> theta() const { return theta_; }
  void set_theta(std::vector<double> theta);

  double logprob(std::size_t prompt, std::size_t response) const;
  /// Gradient of logprob with respect to theta: phi_r - E_p[phi].
  std::vector<double> logprob_grad(std::size_t prompt, std::size_t response) const;

  /// Whitespace token count of a response, used for length normalization.
  int token_count(std::size_t prompt, std::size_t response) const;

  /// Locates a pair built by from_pairs; throws InvalidArgument if absent.
  ToyPairIndex locate(const pairgen::PreferencePair& pair) const;

 private:
  std::vector<double> log_softmax(std::size_t prompt) const;
  const double* feature(std::size_t prompt, std::size_t response) const;

  std::vector<ToyPrompt> prompts_;
  std::vector<std::size_t> offsets_;  // first feature row of each prompt
  std::vector<double> features_;      // row-major, one row of `dim` per response
  std::vector<double> theta_;
};

/// Policy log-probabilities for each pair, plus reference values when a
/// frozen reference policy is given.
LossBatch toy_batch(const ToyPolicy& policy, const ToyPolicy* reference,
                    const std::vector<ToyPairIndex>& pairs);

/// Gradient of the objective with respect to theta (reference held fixed).
struct ToyLoss {
  LossResult loss;
  std::vector<double> grad;
};

ToyLoss toy_loss(Objective objective, const ToyPolicy& policy, const ToyPolicy* reference,
                 const std::vector<ToyPairIndex>& pairs, const Hyperparams& hp);

}  // namespace kbound::losses
