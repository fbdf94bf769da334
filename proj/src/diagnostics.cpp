#include "bobw/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "bobw/errors.hpp"
#include "bobw/rng.hpp"

namespace bobw {

namespace {

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string pair_text(std::int64_t s, std::int64_t t) {
  return "s=" + std::to_string(s) + " t=" + std::to_string(t);
}

}  // namespace

RunHistory::RunHistory(int arms, std::int64_t reserve_rounds) : num_arms(arms) {
  const auto n = static_cast<std::size_t>(std::max<std::int64_t>(reserve_rounds, 0)) + 1;
  probs.reserve((n - 1) * static_cast<std::size_t>(arms));
  cum_outstanding.reserve(n);
  threshold.reserve(n);
  sigma_hat.reserve(n);
  entering_outstanding.reserve(n);
  skips_per_round.reserve(n);
  cum_outstanding.push_back(0);
  threshold.push_back(0.0);
  sigma_hat.push_back(0);
  entering_outstanding.push_back(0);
  skips_per_round.push_back(0);
}

void RunHistory::record_round(const SimplexPoint& x, const RoundOutcome& outcome) {
  if (outcome.round != horizon + 1) throw ContractError("history rounds must be recorded in order");
  probs.insert(probs.end(), x.probs.begin(), x.probs.end());
  cum_outstanding.push_back(outcome.cum_outstanding);
  threshold.push_back(outcome.threshold);
  sigma_hat.push_back(outcome.sigma_hat);
  entering_outstanding.push_back(outcome.entering_outstanding);
  skips_per_round.push_back(outcome.skipped ? 1 : 0);
  horizon = outcome.round;
}

void CheckLine::observe(double margin, const std::string& what) {
  if (instances == 0 || margin < worst_margin) worst_margin = margin;
  ++instances;
  if (margin < 0.0) {
    if (violations == 0) counterexample = what;
    ++violations;
  }
}

bool Report::passed() const {
  return std::all_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.passed(); });
}

void Report::append(const Report& other) { lines.insert(lines.end(), other.lines.begin(), other.lines.end()); }

std::string Report::to_text() const {
  std::string out;
  for (const auto& l : lines) {
    out += "check=" + l.name + " instances=" + std::to_string(l.instances) +
           " violations=" + std::to_string(l.violations) + " worst_margin=" + fmt_real(l.worst_margin);
    if (l.value) out += " value=" + fmt_real(*l.value);
    if (!l.counterexample.empty()) out += " first=\"" + l.counterexample + "\"";
    out += '\n';
  }
  return out;
}

// --- Greedy rearrangement -------------------------------------------------------

RearrangementResult greedy_rearrangement(std::span<const std::int64_t> resolved_at, std::span<const double> window) {
  const auto T = static_cast<std::int64_t>(resolved_at.size());
  if (static_cast<std::int64_t>(window.size()) != T + 1)
    throw ContractError("window series must cover rounds 0..T");

  RearrangementResult r;
  r.horizon = T;
  r.arrival.assign(resolved_at.begin(), resolved_at.end());
  r.pi.assign(static_cast<std::size_t>(T), -1);
  r.nu.assign(static_cast<std::size_t>(T), 0);
  r.nu_new.assign(static_cast<std::size_t>(T + static_cast<std::int64_t>(std::floor(window[T]))), 0);

  // Origins grouped by arrival round, increasing s inside each group.
  std::vector<std::vector<std::int64_t>> by_round(static_cast<std::size_t>(T) + 1);
  for (std::int64_t s = 1; s <= T; ++s) {
    const auto at = resolved_at[static_cast<std::size_t>(s - 1)];
    if (at < 0) continue;
    if (at < s || at > T) throw ContractError("origin " + std::to_string(s) + " resolves outside [s, T]");
    by_round[static_cast<std::size_t>(at)].push_back(s);
  }

  for (std::int64_t t = 1; t <= T; ++t) {
    for (auto s : by_round[static_cast<std::size_t>(t)]) {
      ++r.nu[static_cast<std::size_t>(t - 1)];
      std::int64_t slot = t;
      while (slot <= static_cast<std::int64_t>(r.nu_new.size()) && r.nu_new[static_cast<std::size_t>(slot - 1)] != 0)
        ++slot;
      if (static_cast<double>(slot - t) > window[static_cast<std::size_t>(t)])
        throw NoFreeSlot("no free slot in [" + std::to_string(t) + ", " + std::to_string(t) + " + " +
                         fmt_real(window[static_cast<std::size_t>(t)]) + "] for the arrival from round " +
                         std::to_string(s));
      if (slot > static_cast<std::int64_t>(r.nu_new.size())) r.nu_new.resize(static_cast<std::size_t>(slot), 0);
      r.nu_new[static_cast<std::size_t>(slot - 1)] = 1;
      r.pi[static_cast<std::size_t>(s - 1)] = slot;
    }
  }
  return r;
}

std::vector<std::int64_t> resolution_rounds(const RunHistory& history) {
  std::vector<std::int64_t> out;
  out.reserve(history.ledger.size());
  for (const auto& rec : history.ledger) out.push_back(rec.status == RoundStatus::outstanding ? -1 : rec.resolved_at);
  return out;
}

std::vector<std::int64_t> running_max(std::span<const std::int64_t> series) {
  std::vector<std::int64_t> out(series.size());
  std::int64_t m = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    m = std::max(m, series[i]);
    out[i] = m;
  }
  return out;
}

Report check_rearrangement(const RearrangementResult& result, std::span<const std::int64_t> sigma_max_series) {
  const auto T = result.horizon;
  if (static_cast<std::int64_t>(sigma_max_series.size()) != T + 1)
    throw ContractError("sigma_max series must cover rounds 0..T");

  CheckLine occupancy{"rearrange_occupancy"};
  for (std::size_t i = 0; i < result.nu_new.size(); ++i)
    occupancy.observe(1.0 - result.nu_new[i], "slot " + std::to_string(i + 1) + " holds " + std::to_string(result.nu_new[i]));

  CheckLine conservation{"rearrange_conservation"};
  const auto placed = std::accumulate(result.nu_new.begin(), result.nu_new.end(), std::int64_t{0});
  const auto delivered = std::accumulate(result.nu.begin(), result.nu.end(), std::int64_t{0});
  conservation.observe(placed == delivered ? 0.0 : -std::abs(static_cast<double>(placed - delivered)),
                       std::to_string(placed) + " placed vs " + std::to_string(delivered) + " delivered");

  CheckLine displacement{"rearrange_displacement"};
  std::int64_t undelivered = 0;
  for (std::int64_t s = 1; s <= T; ++s) {
    const auto t = result.arrival[static_cast<std::size_t>(s - 1)];
    if (t < 0) {
      ++undelivered;
      continue;
    }
    const auto moved = result.pi[static_cast<std::size_t>(s - 1)] - t;
    displacement.observe(static_cast<double>(sigma_max_series[static_cast<std::size_t>(t)] - moved),
                         "origin " + std::to_string(s) + " moved " + std::to_string(moved) + " from round " +
                             std::to_string(t));
  }

  CheckLine zeros{"rearrange_zero_slots"};
  const auto sigma_T = sigma_max_series[static_cast<std::size_t>(T)];
  std::int64_t empty = 0;
  for (std::int64_t slot = 1; slot <= T + sigma_T; ++slot)
    if (slot > static_cast<std::int64_t>(result.nu_new.size()) || result.nu_new[static_cast<std::size_t>(slot - 1)] == 0)
      ++empty;
  zeros.observe(static_cast<double>(sigma_T + undelivered - empty),
                std::to_string(empty) + " empty slots, sigma_max^T=" + std::to_string(sigma_T) +
                    ", unresolved=" + std::to_string(undelivered));

  return Report{{occupancy, conservation, displacement, zeros}};
}

// --- Drift -----------------------------------------------------------------------

namespace {

std::int64_t drift_window(const RunHistory& h, std::int64_t t) {
  const auto w = static_cast<std::int64_t>(std::floor(h.threshold[static_cast<std::size_t>(t)]));
  return std::min(w, t - 1);
}

void drift_pair(const RunHistory& h, std::int64_t s, std::int64_t t, CheckLine& line) {
  const double lambda =
      implicit_exploration(h.cum_outstanding[static_cast<std::size_t>(s)], h.cum_outstanding[static_cast<std::size_t>(t)]);
  double margin = std::numeric_limits<double>::infinity();
  std::size_t worst_arm = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(h.num_arms); ++i) {
    const double m = 4.0 * std::max(h.prob(s, i), lambda) - h.prob(t, i);
    if (m < margin) {
      margin = m;
      worst_arm = i;
    }
  }
  line.observe(margin, pair_text(s, t) + " arm=" + std::to_string(worst_arm));
}

}  // namespace

std::int64_t drift_pair_count(const RunHistory& history) {
  std::int64_t n = 0;
  for (std::int64_t t = 1; t <= history.horizon; ++t) n += drift_window(history, t) + 1;
  return n;
}

CheckLine check_drift(const RunHistory& history, std::int64_t budget, std::uint64_t seed) {
  CheckLine line{"drift"};
  const auto T = history.horizon;
  std::vector<std::int64_t> prefix(static_cast<std::size_t>(T) + 1, 0);
  for (std::int64_t t = 1; t <= T; ++t)
    prefix[static_cast<std::size_t>(t)] = prefix[static_cast<std::size_t>(t - 1)] + drift_window(history, t) + 1;
  const auto total = prefix.back();

  if (budget >= total) {
    for (std::int64_t t = 1; t <= T; ++t)
      for (std::int64_t s = t - drift_window(history, t); s <= t; ++s) drift_pair(history, s, t, line);
    return line;
  }

  Rng rng = make_stream(seed, 0, StreamTag::diagnostics);
  for (std::int64_t k = 0; k < budget; ++k) {
    const auto idx = static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(total));
    // Round t owns pair indices [prefix[t-1], prefix[t]).
    const auto it = std::upper_bound(prefix.begin(), prefix.end(), idx);
    const auto t = static_cast<std::int64_t>(it - prefix.begin());
    const auto s = t - (idx - prefix[static_cast<std::size_t>(t - 1)]);
    drift_pair(history, s, t, line);
  }
  return line;
}

// --- Implicit-exploration mass ----------------------------------------------------------

LambdaSum lambda_sum_report(const RunHistory& history) {
  const auto T = history.horizon;
  const auto sigma_max = running_max(history.sigma_hat);
  const auto& D = history.cum_outstanding;
  LambdaSum out;
  for (std::int64_t t = 1; t <= T; ++t) {
    const auto& rec = history.ledger[static_cast<std::size_t>(t - 1)];
    const std::int64_t waited = rec.status == RoundStatus::outstanding ? T - t : rec.waited;
    const auto first = std::min(t + waited, T);
    const auto second = std::min(t + waited + sigma_max[static_cast<std::size_t>(t)], T);
    out.waited_sum += implicit_exploration(D[static_cast<std::size_t>(t)], D[static_cast<std::size_t>(first)]);
    out.shifted_sum += implicit_exploration(D[static_cast<std::size_t>(t)], D[static_cast<std::size_t>(second)]);
  }
  out.sum = out.waited_sum + out.shifted_sum;
  out.sigma_hat_max = sigma_max.back();
  out.ratio = out.sigma_hat_max > 0 ? out.sum / static_cast<double>(out.sigma_hat_max) : 0.0;
  return out;
}

// --- Skip-set minimizer ----------------------------------------------------------

SkipMinimizer skip_set_minimizer(std::span<const std::int64_t> delays, int num_arms) {
  if (num_arms < 2) throw ConfigError("arms: K must be >= 2");
  const double k = static_cast<double>(num_arms);
  SkipMinimizer out;
  out.scale = std::pow(k, 2.0 / 3.0) * std::log(k);

  std::vector<std::int64_t> sorted(delays.begin(), delays.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto total = std::accumulate(sorted.begin(), sorted.end(), std::int64_t{0});
  out.d_max = sorted.empty() ? 0 : sorted.front();
  out.sqrt_total_delay = std::sqrt(static_cast<double>(total));

  std::int64_t kept = total;
  out.best_value = std::sqrt(static_cast<double>(kept) * out.scale);
  out.unscaled_min = std::sqrt(static_cast<double>(kept));
  for (std::size_t m = 1; m <= sorted.size(); ++m) {
    kept -= sorted[m - 1];
    const double value = static_cast<double>(m) + std::sqrt(static_cast<double>(kept) * out.scale);
    if (value < out.best_value) {
      out.best_value = value;
      out.best_count = static_cast<std::int64_t>(m);
    }
    out.unscaled_min = std::min(out.unscaled_min, static_cast<double>(m) + std::sqrt(static_cast<double>(kept)));
  }
  out.delay_floor_holds =
      out.sqrt_total_delay <= out.unscaled_min + static_cast<double>(out.d_max) + 1e-9 * (1.0 + out.sqrt_total_delay);
  return out;
}

// --- Suite -------------------------------------------------------------------------------

namespace {

CheckLine check_one_skip(const RunHistory& h) {
  CheckLine line{"one_skip_per_round"};
  for (std::int64_t t = 1; t <= h.horizon; ++t) {
    const int n = h.skips_per_round[static_cast<std::size_t>(t)];
    line.observe(1.0 - n, "MultipleSkips: " + std::to_string(n) + " skips at round " + std::to_string(t));
  }
  return line;
}

CheckLine check_doubling(const RunHistory& h) {
  CheckLine line{"cum_outstanding_doubling"};
  const auto& D = h.cum_outstanding;
  for (std::int64_t t = 2; t <= h.horizon; ++t) {
    const auto w = drift_window(h, t);
    for (std::int64_t s = t - w; s < t; ++s)
      line.observe(2.0 * static_cast<double>(D[static_cast<std::size_t>(s)]) - static_cast<double>(D[static_cast<std::size_t>(t)]),
                   pair_text(s, t));
  }
  return line;
}

CheckLine check_waiting_budget(const RunHistory& h) {
  CheckLine line{"waiting_budget"};
  const auto T = h.horizon;
  std::vector<std::int64_t> waits_by_round(static_cast<std::size_t>(T) + 1, 0);
  for (const auto& rec : h.ledger)
    if (rec.status != RoundStatus::outstanding) waits_by_round[static_cast<std::size_t>(rec.resolved_at)] += rec.waited;
  std::int64_t resolved = 0;
  for (std::int64_t t = 1; t <= T; ++t) {
    resolved += waits_by_round[static_cast<std::size_t>(t)];
    line.observe(2.0 * static_cast<double>(h.cum_outstanding[static_cast<std::size_t>(t)]) - static_cast<double>(resolved),
                 "t=" + std::to_string(t) + " waited=" + std::to_string(resolved));
  }
  return line;
}

CheckLine check_skip_budget(const RunHistory& h) {
  CheckLine line{"skip_budget"};
  std::int64_t skips = 0;
  const RoundRecord* last = nullptr;
  for (const auto& rec : h.ledger) {
    if (rec.status != RoundStatus::skipped) continue;
    ++skips;
    if (last == nullptr || rec.resolved_at > last->resolved_at) last = &rec;
  }
  const double bound = last ? 2.0 * h.threshold_scale * static_cast<double>(last->waited) : 0.0;
  line.observe(bound - static_cast<double>(skips), "S*=" + std::to_string(skips) + " bound=" + fmt_real(bound));
  line.value = static_cast<double>(skips);
  return line;
}

CheckLine check_skip_floor(const RunHistory& h, std::span<const std::int64_t> delays) {
  CheckLine line{"skip_minimizer_floor"};
  const auto mini = skip_set_minimizer(delays, h.num_arms);
  const double floor_value = std::sqrt(static_cast<double>(h.cum_outstanding.back()) * mini.scale);
  line.observe(mini.best_value - floor_value + 1e-9 * (1.0 + floor_value),
               "sqrt(D_T K^{2/3} log K)=" + fmt_real(floor_value) + " minimizer=" + fmt_real(mini.best_value));
  line.value = mini.best_value;
  return line;
}

}  // namespace

Report run_invariant_suite(const RunHistory& history, const SuiteOptions& options) {
  Report report;
  if (options.skips) {
    report.lines.push_back(check_one_skip(history));
    report.lines.push_back(check_doubling(history));
    report.lines.push_back(check_waiting_budget(history));
    report.lines.push_back(check_skip_budget(history));
    if (!options.delays.empty()) {
      report.lines.push_back(check_skip_floor(history, options.delays));
      const auto mini = skip_set_minimizer(options.delays, history.num_arms);
      CheckLine floor{"delay_floor"};
      floor.observe(mini.unscaled_min + static_cast<double>(mini.d_max) - mini.sqrt_total_delay,
                    "sqrt(D)=" + fmt_real(mini.sqrt_total_delay));
      report.lines.push_back(floor);
    }
  }
  if (options.drift) report.lines.push_back(check_drift(history, options.drift_budget, options.seed));
  if (options.rearrange) {
    const auto resolved = resolution_rounds(history);
    const auto sigma_max = running_max(history.entering_outstanding);
    std::vector<double> window(sigma_max.begin(), sigma_max.end());
    try {
      const auto result = greedy_rearrangement(resolved, window);
      report.append(check_rearrangement(result, sigma_max));

      CheckLine beyond{"rearrange_beyond_threshold"};
      std::int64_t count = 0;
      for (std::size_t s = 0; s < result.pi.size(); ++s) {
        if (result.pi[s] < 0) continue;
        const auto t = result.arrival[s];
        if (static_cast<double>(result.pi[s] - t) > history.threshold[static_cast<std::size_t>(t)]) ++count;
      }
      beyond.instances = static_cast<std::int64_t>(result.pi.size());
      beyond.value = static_cast<double>(count);
      report.lines.push_back(beyond);
    } catch (const NoFreeSlot& e) {
      CheckLine line{"rearrange_window"};
      line.observe(-1.0, e.what());
      report.lines.push_back(line);
    }
  }
  if (options.lambda) {
    const auto ls = lambda_sum_report(history);
    CheckLine line{"lambda_sum"};
    line.instances = history.horizon;
    line.worst_margin = 0.0;
    line.value = ls.ratio;
    line.counterexample.clear();
    report.lines.push_back(line);
  }
  return report;
}

}  // namespace bobw
