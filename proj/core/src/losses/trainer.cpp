#include "kbound/losses/trainer.hpp"

#include <cmath>
#include <cstdio>

#include "kbound/errors.hpp"

namespace kbound::losses {

TrainResult toy_train(ToyPolicy& policy, const std::vector<ToyPairIndex>& pairs, Objective method,
                      int steps, double lr, const Hyperparams& hp,
                      const std::optional<ToyPolicy>& reference) {
  if (steps < 0) throw InvalidArgument("toy_train: steps must be >= 0");
  if (!(lr > 0.0)) throw InvalidArgument("toy_train: lr must be > 0");
  if (pairs.empty()) throw EmptyBatch();
  if (needs_reference(method) && !reference) {
    throw MissingReference("dpo training needs a frozen reference snapshot");
  }
  const ToyPolicy* ref = reference ? &*reference : nullptr;

  TrainResult result;
  std::vector<double> theta(policy.theta().begin(), policy.theta().end());
  for (int step = 0; step <= steps; ++step) {
    const ToyLoss tl = toy_loss(method, policy, ref, pairs, hp);
    const LossBatch batch = toy_batch(policy, nullptr, pairs);
    TrajectoryPoint pt;
    pt.step = step;
    for (const auto& p : batch) {
      pt.mean_logp_w += p.logp_w_policy;
      pt.mean_logp_l += p.logp_l_policy;
    }
    pt.mean_logp_w /= static_cast<double>(batch.size());
    pt.mean_logp_l /= static_cast<double>(batch.size());
    pt.loss = tl.loss.value;
    result.clamped += tl.loss.clamped;
    result.trajectory.push_back(pt);
    if (!std::isfinite(pt.loss)) {
      result.diverged = true;
      break;
    }
    if (step == steps) break;
    bool finite = true;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      theta[k] -= lr * tl.grad[k];
      finite = finite && std::isfinite(theta[k]);
    }
    if (!finite) {
      result.diverged = true;
      break;
    }
    policy.set_theta(theta);
  }
  return result;
}

TrainResult toy_train(ToyPolicy& policy, const std::vector<pairgen::PreferencePair>& pairs,
                      Objective method, int steps, double lr, const Hyperparams& hp,
                      const std::optional<ToyPolicy>& reference) {
  std::vector<ToyPairIndex> index;
  index.reserve(pairs.size());
  for (const auto& p : pairs) index.push_back(policy.locate(p));
  return toy_train(policy, index, method, steps, lr, hp, reference);
}

std::string trajectory_csv(const std::vector<TrajectoryPoint>& trajectory) {
  std::string out = "step,logp_w,logp_l,loss\n";
  char buf[128];
  for (const auto& p : trajectory) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", p.step, p.mean_logp_w, p.mean_logp_l, p.loss);
    out += buf;
  }
  return out;
}

}  // namespace kbound::losses
