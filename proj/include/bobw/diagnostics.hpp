#pragma once

// Empirical falsifiers for the guarantees the scheduler is supposed to
// satisfy. Each check scans a recorded run and reports how many instances it
// looked at, how many violated the bound, and the worst margin
// (bound - observed; negative means violated).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bobw/scheduler.hpp"

namespace bobw {

/// Everything a run leaves behind that the checks need. Per-round vectors are
/// indexed by t in [0, T]; entry 0 is the initial state.
struct RunHistory {
  int num_arms = 2;
  std::int64_t horizon = 0;
  double threshold_scale = 0.0;
  std::vector<double> probs;  // x_t, row t-1, K entries per row
  std::vector<std::int64_t> cum_outstanding;
  std::vector<double> threshold;
  std::vector<std::int64_t> sigma_hat;
  std::vector<std::int64_t> entering_outstanding;
  std::vector<int> skips_per_round;
  std::vector<RoundRecord> ledger;

  explicit RunHistory(int arms = 2, std::int64_t reserve_rounds = 0);

  double prob(std::int64_t t, std::size_t arm) const {
    return probs[static_cast<std::size_t>(t - 1) * static_cast<std::size_t>(num_arms) + arm];
  }
  /// Appends round t's distribution and accounting.
  void record_round(const SimplexPoint& x, const RoundOutcome& outcome);
};

struct CheckLine {
  std::string name;
  std::int64_t instances = 0;
  std::int64_t violations = 0;
  double worst_margin = 0.0;
  std::string counterexample;  // first violation, empty if none
  std::optional<double> value; // informational statistic, not a bound

  CheckLine() = default;
  explicit CheckLine(std::string check_name) : name(std::move(check_name)) {}

  bool passed() const { return violations == 0; }
  void observe(double margin, const std::string& what);
};

struct Report {
  std::vector<CheckLine> lines;

  bool passed() const;
  void append(const Report& other);
  /// One line per check: name, instances, violations, worst margin.
  std::string to_text() const;
};

// --- Greedy rearrangement ---------------------------------------------------

struct RearrangementResult {
  std::int64_t horizon = 0;
  std::vector<std::int64_t> pi;     // pi[s - 1], -1 when s never arrived within T
  std::vector<std::int64_t> arrival;  // s + d-hat_s, -1 when unresolved
  std::vector<int> nu_new;          // nu_new[slot - 1]
  std::vector<std::int64_t> nu;     // nu[t - 1], arrivals per round before rearranging
};

/// Processes rounds in order and moves every arrival at t to the earliest free
/// slot >= t. `resolved_at[s - 1]` is s + d-hat_s (-1 if unresolved by T).
/// `window[t]` bounds the displacement; a placement beyond t + window[t]
/// throws NoFreeSlot. Slots are allocated over [1, T + window[T]] and grow if
/// a placement needs more.
RearrangementResult greedy_rearrangement(std::span<const std::int64_t> resolved_at, std::span<const double> window);

/// Resolution round per origin from a run's ledger (-1 if still outstanding).
std::vector<std::int64_t> resolution_rounds(const RunHistory& history);

/// Running maximum of a per-round series indexed by [0, T].
std::vector<std::int64_t> running_max(std::span<const std::int64_t> series);

/// Occupancy in {0,1}, conservation, displacement <= sigma_max^t, and the zero
/// slot count within [1, T + sigma_max^T] against sigma_max^T plus the
/// observations that never resolved inside the horizon.
Report check_rearrangement(const RearrangementResult& result, std::span<const std::int64_t> sigma_max_series);

// --- Drift ------------------------------------------------------------------

/// x_{t,i} <= 4 max(x_{s,i}, lambda_{s,t}) over pairs s <= t with
/// t - s <= d_max^t. Exhaustive when the budget covers every pair, otherwise
/// `budget` pairs drawn uniformly with the given seed.
CheckLine check_drift(const RunHistory& history, std::int64_t budget, std::uint64_t seed = 0);

/// Number of (s, t) pairs check_drift would visit exhaustively.
std::int64_t drift_pair_count(const RunHistory& history);

// --- Implicit-exploration mass ------------------------------------------------

struct LambdaSum {
  double waited_sum = 0.0;   // sum_t lambda_{t, t + d-hat_t}
  double shifted_sum = 0.0;  // sum_t lambda_{t, t + d-hat_t + sigma_max^t}
  double sum = 0.0;
  std::int64_t sigma_hat_max = 0;
  double ratio = 0.0;  // sum / sigma_hat_max, 0 when sigma_hat_max = 0
};

/// Rounds unresolved at T use d-hat = T - t; indices past T read D_T.
LambdaSum lambda_sum_report(const RunHistory& history);

// --- Skip-set minimizer ---------------------------------------------------------

struct SkipMinimizer {
  std::int64_t best_count = 0;  // |S|
  double best_value = 0.0;      // |S| + sqrt(D_{not S} * K^{2/3} log K)
  double scale = 0.0;           // K^{2/3} log K
  // sqrt(D) <= min_S(|S| + sqrt(D_{not S})) + d_max, no K factors
  double unscaled_min = 0.0;
  double sqrt_total_delay = 0.0;
  std::int64_t d_max = 0;
  bool delay_floor_holds = true;
};

/// Exact: skipping the largest delays first is optimal, so scan prefixes of the
/// descending order.
SkipMinimizer skip_set_minimizer(std::span<const std::int64_t> delays, int num_arms);

// --- Aggregated suite ------------------------------------------------------------

struct SuiteOptions {
  bool skips = true;      // one-skip, D doubling, waiting budget, skip budget
  bool drift = false;
  bool rearrange = false;
  bool lambda = false;
  std::int64_t drift_budget = 100000;
  std::uint64_t seed = 0;
  /// Realized delays; enables the skip-minimizer floor check when present.
  std::span<const std::int64_t> delays{};
};

Report run_invariant_suite(const RunHistory& history, const SuiteOptions& options);

}  // namespace bobw
