#include "bobw/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bobw/errors.hpp"

namespace bobw {

double threshold_scale(ThresholdRule rule, int num_arms) {
  const double k = static_cast<double>(num_arms);
  switch (rule) {
    case ThresholdRule::standard:
      return 49.0 * std::pow(k, 2.0 / 3.0) * std::log(k);
    case ThresholdRule::log_k:
      return std::log(k);
  }
  return 0.0;
}

double implicit_exploration(std::int64_t d_at_play, std::int64_t d_now) {
  if (d_now == d_at_play || d_now == 0) return 0.0;
  const double now = static_cast<double>(d_now);
  return std::exp(-now / (now - static_cast<double>(d_at_play)));
}

Scheduler::Scheduler(SchedulerOptions options) : Scheduler(options, SchedulerState{}) {}

Scheduler::Scheduler(SchedulerOptions options, SchedulerState state)
    : options_(options), state_(std::move(state)), threshold_scale_(threshold_scale(options.threshold, options.num_arms)) {
  if (options_.num_arms < 2) throw ConfigError("the scheduler needs K >= 2 arms (log K divides the threshold)");
  if (state_.cum_loss_est.empty()) state_.cum_loss_est.assign(static_cast<std::size_t>(options_.num_arms), 0.0);
  if (state_.cum_loss_est.size() != static_cast<std::size_t>(options_.num_arms))
    throw ContractError("state has " + std::to_string(state_.cum_loss_est.size()) + " loss estimates for " +
                        std::to_string(options_.num_arms) + " arms");
}

RegularizerParams Scheduler::next_round_params() const {
  return RegularizerParams::for_round(state_.t + 1, state_.cum_outstanding, options_.num_arms);
}

SimplexPoint Scheduler::begin_round() const {
  if (state_.round_open) throw ContractError("begin_round called while round " + std::to_string(state_.t) + " is open");
  return solve_ftrl(state_.cum_loss_est, next_round_params()).point;
}

RoundRecord& Scheduler::record(std::int64_t round) {
  if (round < 1 || round > state_.t) throw UnknownOrigin("no ledger entry for round " + std::to_string(round));
  return state_.ledger[static_cast<std::size_t>(round - 1)];
}

void Scheduler::record_play(const SimplexPoint& x, std::size_t arm) {
  if (state_.round_open) throw DoublePlay("round " + std::to_string(state_.t) + " already has a play");
  if (arm >= static_cast<std::size_t>(options_.num_arms))
    throw ContractError("arm " + std::to_string(arm) + " outside [0, " + std::to_string(options_.num_arms) + ")");
  if (x.size() != static_cast<std::size_t>(options_.num_arms)) throw ContractError("distribution has wrong size");

  ++state_.t;
  RoundRecord rec;
  rec.round = state_.t;
  rec.arm = arm;
  rec.play_prob = x[arm];
  state_.ledger.push_back(rec);
  state_.outstanding_rounds.insert(state_.t);
  state_.round_open = true;
  state_.counted = false;
  state_.delivered = false;
}

RoundOutcome Scheduler::update_counts(std::span<const Arrival> arrivals) {
  if (!state_.round_open || state_.counted) throw ContractError("update_counts needs a freshly played round");
  const std::int64_t t = state_.t;

  // Rounds s <= t-1 still waiting when round t starts.
  const auto entering = static_cast<std::int64_t>(
      std::distance(state_.outstanding_rounds.begin(), state_.outstanding_rounds.lower_bound(t)));

  std::vector<std::int64_t> landing;
  for (const auto& a : arrivals)
    if (a.origin < t && state_.outstanding_rounds.count(a.origin) != 0) landing.push_back(a.origin);
  std::sort(landing.begin(), landing.end());
  landing.erase(std::unique(landing.begin(), landing.end()), landing.end());

  state_.entering_outstanding = entering;
  state_.sigma_hat = entering - static_cast<std::int64_t>(landing.size());
  state_.cum_outstanding += state_.sigma_hat;
  state_.sigma_hat_running_max = std::max(state_.sigma_hat_running_max, state_.sigma_hat);
  state_.threshold = std::sqrt(static_cast<double>(state_.cum_outstanding) / threshold_scale_);
  state_.ledger.back().d_snapshot = state_.cum_outstanding;
  state_.counted = true;

  RoundOutcome out;
  out.round = t;
  out.sigma_hat = state_.sigma_hat;
  out.entering_outstanding = entering;
  out.cum_outstanding = state_.cum_outstanding;
  out.threshold = state_.threshold;
  return out;
}

void Scheduler::deliver(std::span<const Arrival> arrivals) {
  if (!state_.counted || state_.delivered) throw ContractError("deliver must follow update_counts once per round");
  const std::int64_t t = state_.t;
  for (const auto& a : arrivals) {
    RoundRecord& rec = record(a.origin);
    if (rec.status == RoundStatus::skipped) continue;
    if (rec.status == RoundStatus::arrived)
      throw AlreadyResolved("round " + std::to_string(a.origin) + " already delivered");
    if (!(a.loss >= 0.0 && a.loss <= 1.0))
      throw ContractError("loss " + std::to_string(a.loss) + " from round " + std::to_string(a.origin) +
                          " outside [0, 1]");

    const double lambda =
        options_.implicit_exploration ? implicit_exploration(rec.d_snapshot, state_.cum_outstanding) : 0.0;
    state_.cum_loss_est[rec.arm] += a.loss / std::max(rec.play_prob, lambda);

    rec.status = RoundStatus::arrived;
    rec.delay = t - a.origin;
    rec.waited = rec.delay;
    rec.resolved_at = t;
    state_.outstanding_rounds.erase(a.origin);
  }
  state_.delivered = true;
}

std::optional<std::int64_t> Scheduler::apply_skipping() {
  if (!state_.delivered) throw ContractError("apply_skipping must follow deliver");
  const std::int64_t t = state_.t;

  // Oldest rounds have waited longest, so qualifying rounds form a prefix.
  std::vector<std::int64_t> due;
  for (auto s : state_.outstanding_rounds) {
    if (s >= t || static_cast<double>(t - s) < state_.threshold) break;
    due.push_back(s);
  }
  state_.round_open = false;

  if (due.empty()) return std::nullopt;
  if (due.size() > 1)
    throw MultipleSkips(std::to_string(due.size()) + " rounds reached the skipping threshold at round " +
                        std::to_string(t));

  const std::int64_t s = due.front();
  RoundRecord& rec = record(s);
  rec.status = RoundStatus::skipped;
  rec.waited = t - s;
  rec.resolved_at = t;
  state_.outstanding_rounds.erase(s);
  state_.skip_set.push_back(s);
  ++state_.skip_count;
  return s;
}

RoundOutcome Scheduler::end_round(std::span<const Arrival> arrivals) {
  RoundOutcome out = update_counts(arrivals);
  deliver(arrivals);
  out.skipped = apply_skipping();
  return out;
}

}  // namespace bobw
