#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bobw/scheduler.hpp"

namespace bobw {

/// Observation delivered to UCB: the arm it was played on and its loss.
struct ArmLoss {
  std::size_t arm = 0;
  double loss = 0.0;
};

struct UcbState {
  std::vector<std::int64_t> counts;  // arrived observations per arm
  std::vector<double> means;         // empirical mean loss per arm
  std::vector<std::int64_t> plays;   // pulls per arm, arrived or not
  std::int64_t t = 0;                // rounds played so far

  explicit UcbState(int num_arms = 2);
  int num_arms() const { return static_cast<int>(counts.size()); }
};

/// Queued-update UCB1 on losses. Folds `arrivals` into the statistics, then
/// picks the arm for round t+1: arms with no arrived observation first (fewest
/// pulls, then lowest index), otherwise argmin of mean - sqrt(2 log t / n).
std::size_t ucb_delayed_step(UcbState& state, std::span<const ArmLoss> arrivals);

struct NoIxConfig {
  int num_arms = 2;
  ThresholdRule threshold = ThresholdRule::standard;
};

/// The FTRL ancestor without implicit exploration: the same scheduler with
/// lambda forced to 0 and a swappable skipping-threshold constant.
Scheduler ftrl_no_ix_factory(const NoIxConfig& config);

}  // namespace bobw
