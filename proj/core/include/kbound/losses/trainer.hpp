#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "kbound/losses/toy_policy.hpp"

namespace kbound::losses {

struct TrajectoryPoint {
  int step = 0;
  double mean_logp_w = 0.0;
  double mean_logp_l = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  /// steps + 1 points; point k is measured before update k.
  std::vector<TrajectoryPoint> trajectory;
  bool diverged = false;
  std::size_t clamped = 0;
};

/// Plain constant-rate gradient descent on the toy policy. DPO needs a frozen
/// `reference` (normally a copy taken at step 0) and throws MissingReference
/// without one. A non-finite loss stops training with `diverged` set.
TrainResult toy_train(ToyPolicy& policy, const std::vector<ToyPairIndex>& pairs, Objective method,
                      int steps, double lr, const Hyperparams& hp = {},
                      const std::optional<ToyPolicy>& reference = std::nullopt);

/// Convenience overload locating each preference pair in the policy.
TrainResult toy_train(ToyPolicy& policy, const std::vector<pairgen::PreferencePair>& pairs,
                      Objective method, int steps, double lr, const Hyperparams& hp = {},
                      const std::optional<ToyPolicy>& reference = std::nullopt);

/// `step,logp_w,logp_l,loss` with a header row.
std::string trajectory_csv(const std::vector<TrajectoryPoint>& trajectory);

}  // namespace kbound::losses
