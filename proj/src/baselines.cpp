#include "bobw/baselines.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bobw/errors.hpp"

namespace bobw {

UcbState::UcbState(int num_arms)
    : counts(static_cast<std::size_t>(num_arms), 0),
      means(static_cast<std::size_t>(num_arms), 0.0),
      plays(static_cast<std::size_t>(num_arms), 0) {
  if (num_arms < 2) throw ConfigError("UCB needs K >= 2 arms");
}

std::size_t ucb_delayed_step(UcbState& state, std::span<const ArmLoss> arrivals) {
  const auto k = state.counts.size();
  for (const auto& a : arrivals) {
    if (a.arm >= k) throw ContractError("arrival for unknown arm " + std::to_string(a.arm));
    auto& n = state.counts[a.arm];
    ++n;
    state.means[a.arm] += (a.loss - state.means[a.arm]) / static_cast<double>(n);
  }

  const std::int64_t t = ++state.t;
  std::size_t choice = k;
  for (std::size_t i = 0; i < k; ++i) {
    if (state.counts[i] != 0) continue;
    if (choice == k || state.plays[i] < state.plays[choice]) choice = i;
  }
  if (choice == k) {
    double best = std::numeric_limits<double>::infinity();
    const double log_t = std::log(static_cast<double>(t));
    for (std::size_t i = 0; i < k; ++i) {
      const double index = state.means[i] - std::sqrt(2.0 * log_t / static_cast<double>(state.counts[i]));
      if (index < best) {
        best = index;
        choice = i;
      }
    }
  }
  ++state.plays[choice];
  return choice;
}

Scheduler ftrl_no_ix_factory(const NoIxConfig& config) {
  if (config.num_arms < 2) throw ConfigError("arms: K must be >= 2 for ftrl_no_ix");
  SchedulerOptions options;
  options.num_arms = config.num_arms;
  options.implicit_exploration = false;
  options.threshold = config.threshold;
  return Scheduler(options);
}

}  // namespace bobw
