#pragma once

#include <string>
#include <vector>

#include "kbound/losses/toy_policy.hpp"

namespace kbound::losses {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  /// Set when the check was not run (ORPO near the p -> 1 clamp).
  bool skipped = false;
  std::string note;
};

/// Compares the analytic gradient of `objective` with central finite
/// differences, coordinate by coordinate. Relative error is
/// |a - n| / max(|a| + |n|, 1e-6). Throws NumericalFailure if any evaluated
/// loss is non-finite.
GradCheckResult grad_check(Objective objective, const ToyPolicy& policy, const ToyPolicy* reference,
                           const std::vector<ToyPairIndex>& pairs, const Hyperparams& hp = {},
                           double epsilon = 1e-5);

}  // namespace kbound::losses
