#include "kbound/losses/grad_check.hpp"

#include <cmath>
#include <sstream>

#include "kbound/errors.hpp"

namespace kbound::losses {
namespace {

// ORPO's odds slope 1/(1-p) explodes near the clamp, so finite differences
// there measure the clamp rather than the objective.
constexpr double kOrpoSkipMargin = 1e-6;

double checked(double v, const char* what, std::size_t coord) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "non-finite loss (" << v << ") at " << what << " for coordinate " << coord;
    throw NumericalFailure(os.str());
  }
  return v;
}

}  // namespace

GradCheckResult grad_check(Objective objective, const ToyPolicy& policy, const ToyPolicy* reference,
                           const std::vector<ToyPairIndex>& pairs, const Hyperparams& hp,
                           double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("grad_check epsilon must be > 0");
  GradCheckResult result;
  result.coordinates = policy.dim();

  if (objective == Objective::kOrpo) {
    for (const auto& p : toy_batch(policy, reference, pairs)) {
      const bool normalized = hp.odds_mode == OddsMode::kLengthNormalized;
      for (double lp : {normalized ? p.logp_w_policy / p.len_w : p.logp_w_policy,
                        normalized ? p.logp_l_policy / p.len_l : p.logp_l_policy}) {
        if (-std::expm1(lp) < kOrpoSkipMargin) {
          result.skipped = true;
          result.note = "orpo: a pair probability is within 1e-6 of 1 (clamp region); check skipped";
          return result;
        }
      }
    }
  }

  const ToyLoss analytic = toy_loss(objective, policy, reference, pairs, hp);
  checked(analytic.loss.value, "base point", 0);

  ToyPolicy probe = policy;
  std::vector<double> theta(policy.theta().begin(), policy.theta().end());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double orig = theta[k];
    theta[k] = orig + epsilon;
    probe.set_theta(theta);
    const double up = checked(evaluate(objective, toy_batch(probe, reference, pairs), hp).value, "+eps", k);
    theta[k] = orig - epsilon;
    probe.set_theta(theta);
    const double down = checked(evaluate(objective, toy_batch(probe, reference, pairs), hp).value, "-eps", k);
    theta[k] = orig;

    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic.grad[k];
    const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-6);
    result.max_relative_error = std::max(result.max_relative_error, rel);
  }
  return result;
}

}  // namespace kbound::losses
