#pragma once

// Round-by-round state machine of the delayed-feedback best-of-both-worlds
// learner. Within round t the calls go
//
//   begin_round -> record_play -> update_counts -> deliver -> apply_skipping
//
// (end_round bundles the last three). Counting happens before delivery so
// that the implicit-exploration terms see the final D_t; arrivals at t have
// s + d_s = t and never count as outstanding at t, so the order does not
// change sigma_hat.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "bobw/ftrl.hpp"

namespace bobw {

enum class RoundStatus { outstanding, arrived, skipped };

struct RoundRecord {
  std::int64_t round = 0;
  std::size_t arm = 0;
  double play_prob = 0.0;       // x_{s, I_s}
  std::int64_t d_snapshot = 0;  // D_s after round s's count
  std::int64_t delay = -1;      // d_s, known once the loss arrives
  std::int64_t waited = -1;     // d-hat_s, set on arrival or skip
  std::int64_t resolved_at = -1;
  RoundStatus status = RoundStatus::outstanding;
};

/// An observation landing in the current round.
struct Arrival {
  std::int64_t origin = 0;
  double loss = 0.0;
};

enum class ThresholdRule {
  standard,  // D / (49 K^{2/3} log K)
  log_k,     // D / log K
};

struct SchedulerOptions {
  int num_arms = 2;
  bool implicit_exploration = true;
  ThresholdRule threshold = ThresholdRule::standard;
};

/// Denominator c of the skipping threshold sqrt(D / c).
double threshold_scale(ThresholdRule rule, int num_arms);

/// lambda_{s,t} = exp(-D_t / (D_t - D_s)); 0 when D_t == D_s or D_t == 0.
double implicit_exploration(std::int64_t d_at_play, std::int64_t d_now);

struct SchedulerState {
  std::int64_t t = 0;  // last round that has been played
  std::vector<double> cum_loss_est;
  std::vector<std::int64_t> skip_set;
  std::int64_t cum_outstanding = 0;
  std::int64_t sigma_hat = 0;
  std::int64_t sigma_hat_running_max = 0;
  std::int64_t entering_outstanding = 0;  // |{s < t : s + d-hat_s >= t}|
  double threshold = 0.0;
  std::int64_t skip_count = 0;
  std::vector<RoundRecord> ledger;              // ledger[s - 1] is round s
  std::set<std::int64_t> outstanding_rounds;    // index over ledger status
  bool round_open = false;
  bool counted = false;
  bool delivered = false;
};

/// What happened to the accounting in one round.
struct RoundOutcome {
  std::int64_t round = 0;
  std::int64_t sigma_hat = 0;
  std::int64_t entering_outstanding = 0;
  std::int64_t cum_outstanding = 0;
  double threshold = 0.0;
  std::optional<std::int64_t> skipped;
};

class Scheduler {
 public:
  explicit Scheduler(SchedulerOptions options);
  /// Resume from a saved (or hand-built) state.
  Scheduler(SchedulerOptions options, SchedulerState state);

  const SchedulerOptions& options() const { return options_; }
  const SchedulerState& state() const { return state_; }
  int num_arms() const { return options_.num_arms; }

  /// Learning rates for the next round: eta^-1 = sqrt(t), gamma^-1 from D_{t-1}.
  RegularizerParams next_round_params() const;

  /// x_t for the next round. Does not modify the state.
  SimplexPoint begin_round() const;

  /// Opens round t with arm I_t drawn from x_t. Throws DoublePlay if the
  /// previous round is still open.
  void record_play(const SimplexPoint& x, std::size_t arm);

  /// sigma_hat_t, D_t and the threshold. `arrivals` are the observations that
  /// land this round; they are excluded from the outstanding count.
  RoundOutcome update_counts(std::span<const Arrival> arrivals);

  /// Folds arrivals into the loss estimates with implicit exploration.
  /// Arrivals from skipped rounds are dropped.
  void deliver(std::span<const Arrival> arrivals);

  /// Skips the outstanding round whose wait reached the threshold, if any,
  /// and closes the round. Throws MultipleSkips if two rounds qualify.
  std::optional<std::int64_t> apply_skipping();

  /// update_counts + deliver + apply_skipping.
  RoundOutcome end_round(std::span<const Arrival> arrivals);

 private:
  RoundRecord& record(std::int64_t round);

  SchedulerOptions options_;
  SchedulerState state_;
  double threshold_scale_;
};

}  // namespace bobw
