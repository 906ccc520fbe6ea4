#include "kbound/losses/toy_policy.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "kbound/errors.hpp"
#include "kbound/util/rng.hpp"
#include "kbound/util/text.hpp"

namespace kbound::losses {

ToyPolicy::ToyPolicy(std::vector<ToyPrompt> prompts, std::size_t dim, std::uint64_t seed,
                     double init_scale)
    : prompts_(std::move(prompts)) {
  if (dim == 0) throw InvalidArgument("toy policy needs dim >= 1");
  std::size_t rows = 0;
  for (const auto& p : prompts_) {
    if (p.responses.empty()) throw InvalidArgument("toy prompt " + p.key + " has no responses");
    offsets_.push_back(rows);
    rows += p.responses.size();
  }
  features_.resize(rows * dim);
  for (std::size_t pi = 0; pi < prompts_.size(); ++pi) {
    for (std::size_t ri = 0; ri < prompts_[pi].responses.size(); ++ri) {
      std::mt19937_64 engine(
          util::derive_seed(seed, prompts_[pi].key + '\x1f' + prompts_[pi].responses[ri], ri));
      double* row = features_.data() + (offsets_[pi] + ri) * dim;
      for (std::size_t k = 0; k < dim; ++k) row[k] = 2.0 * util::canonical(engine) - 1.0;
    }
  }
  std::mt19937_64 engine(util::derive_seed(seed, "theta", 0));
  theta_.resize(dim);
  for (auto& t : theta_) t = init_scale * (2.0 * util::canonical(engine) - 1.0);
}

ToyPolicy ToyPolicy::from_pairs(const std::vector<pairgen::PreferencePair>& pairs, std::size_t dim,
                                std::uint64_t seed, std::size_t distractors) {
  std::vector<ToyPrompt> prompts;
  prompts.reserve(pairs.size());
  for (const auto& p : pairs) {
    ToyPrompt tp{p.sample_id + '\x1f' + p.prompt, {p.chosen, p.rejected}};
    for (std::size_t d = 0; d < distractors; ++d) tp.responses.push_back("<distractor " + std::to_string(d) + ">");
    prompts.push_back(std::move(tp));
  }
  return ToyPolicy(std::move(prompts), dim, seed);
}

void ToyPolicy::set_theta(std::vector<double> theta) {
  if (theta.size() != theta_.size()) throw InvalidArgument("theta dimension mismatch");
  theta_ = std::move(theta);
}

const double* ToyPolicy::feature(std::size_t prompt, std::size_t response) const {
  return features_.data() + (offsets_.at(prompt) + response) * theta_.size();
}

std::vector<double> ToyPolicy::log_softmax(std::size_t prompt) const {
  const std::size_t n = prompts_.at(prompt).responses.size();
  std::vector<double> scores(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double* phi = feature(prompt, r);
    double s = 0.0;
    for (std::size_t k = 0; k < theta_.size(); ++k) s += theta_[k] * phi[k];
    scores[r] = s;
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  const double lse = mx + std::log(z);
  for (auto& s : scores) s = std::min(0.0, s - lse);
  return scores;
}

double ToyPolicy::logprob(std::size_t prompt, std::size_t response) const {
  return log_softmax(prompt).at(response);
}

std::vector<double> ToyPolicy::logprob_grad(std::size_t prompt, std::size_t response) const {
  const auto lp = log_softmax(prompt);
  const std::size_t d = theta_.size();
  std::vector<double> g(feature(prompt, response), feature(prompt, response) + d);
  for (std::size_t r = 0; r < lp.size(); ++r) {
    const double p = std::exp(lp[r]);
    const double* phi = feature(prompt, r);
    for (std::size_t k = 0; k < d; ++k) g[k] -= p * phi[k];
  }
  return g;
}

int ToyPolicy::token_count(std::size_t prompt, std::size_t response) const {
  return static_cast<int>(util::whitespace_token_count(prompts_.at(prompt).responses.at(response)));
}

ToyPairIndex ToyPolicy::locate(const pairgen::PreferencePair& pair) const {
  const std::string key = pair.sample_id + '\x1f' + pair.prompt;
  for (std::size_t pi = 0; pi < prompts_.size(); ++pi) {
    if (prompts_[pi].key != key) continue;
    const auto& rs = prompts_[pi].responses;
    const auto c = std::find(rs.begin(), rs.end(), pair.chosen);
    const auto r = std::find(rs.begin(), rs.end(), pair.rejected);
    if (c != rs.end() && r != rs.end()) {
      return {pi, static_cast<std::size_t>(c - rs.begin()), static_cast<std::size_t>(r - rs.begin())};
    }
  }
  throw InvalidArgument("pair " + pair.sample_id + " is not part of this toy policy");
}

LossBatch toy_batch(const ToyPolicy& policy, const ToyPolicy* reference,
                    const std::vector<ToyPairIndex>& pairs) {
  LossBatch batch;
  batch.reserve(pairs.size());
  for (const auto& idx : pairs) {
    PairLogprobs p;
    p.logp_w_policy = policy.logprob(idx.prompt, idx.chosen);
    p.logp_l_policy = policy.logprob(idx.prompt, idx.rejected);
    if (reference != nullptr) {
      p.logp_w_ref = reference->logprob(idx.prompt, idx.chosen);
      p.logp_l_ref = reference->logprob(idx.prompt, idx.rejected);
    }
    p.len_w = policy.token_count(idx.prompt, idx.chosen);
    p.len_l = policy.token_count(idx.prompt, idx.rejected);
    batch.push_back(p);
  }
  return batch;
}

ToyLoss toy_loss(Objective objective, const ToyPolicy& policy, const ToyPolicy* reference,
                 const std::vector<ToyPairIndex>& pairs, const Hyperparams& hp) {
  ToyLoss out;
  out.loss = evaluate(objective, toy_batch(policy, reference, pairs), hp);
  out.grad.assign(policy.dim(), 0.0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double gw = out.loss.d_logp_w[i];
    const double gl = out.loss.d_logp_l[i];
    if (gw != 0.0) {
      const auto jw = policy.logprob_grad(pairs[i].prompt, pairs[i].chosen);
      for (std::size_t k = 0; k < jw.size(); ++k) out.grad[k] += gw * jw[k];
    }
    if (gl != 0.0) {
      const auto jl = policy.logprob_grad(pairs[i].prompt, pairs[i].rejected);
      for (std::size_t k = 0; k < jl.size(); ++k) out.grad[k] += gl * jl[k];
    }
  }
  return out;
}

}  // namespace kbound::losses
