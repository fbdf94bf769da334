#include "bobw/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "bobw/baselines.hpp"
#include "bobw/errors.hpp"
#include "bobw/rng.hpp"

namespace bobw {

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::bobw:
      return "bobw";
    case Algorithm::ftrl_no_ix:
      return "ftrl_no_ix";
    case Algorithm::ucb_delayed:
      return "ucb_delayed";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "bobw") return Algorithm::bobw;
  if (name == "ftrl_no_ix") return Algorithm::ftrl_no_ix;
  if (name == "ucb_delayed") return Algorithm::ucb_delayed;
  throw ConfigError("algorithm: expected bobw, ftrl_no_ix or ucb_delayed, got '" + name + "'");
}

std::vector<std::int64_t> default_checkpoints(std::int64_t horizon) {
  std::vector<std::int64_t> out;
  for (std::int64_t p = 1; p < horizon; p *= 2) out.push_back(p);
  out.push_back(horizon);
  return out;
}

void validate(ExperimentConfig& config) {
  const auto& env = config.environment;
  if (env.num_arms < 2) throw ConfigError("arms: K must be >= 2, got " + std::to_string(env.num_arms));
  if (env.horizon < 1) throw ConfigError("horizon: T must be >= 1, got " + std::to_string(env.horizon));
  if (config.seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (config.parallel < 1) throw ConfigError("parallel: must be >= 1");
  if (config.diagnostics.drift_budget < 0) throw ConfigError("drift_budget: must be >= 0");
  if (config.checkpoints.empty()) config.checkpoints = default_checkpoints(env.horizon);
  for (std::size_t i = 0; i < config.checkpoints.size(); ++i) {
    const auto c = config.checkpoints[i];
    if (c < 1 || c > env.horizon)
      throw ConfigError("checkpoints: " + std::to_string(c) + " lies outside [1, " + std::to_string(env.horizon) + "]");
    if (i > 0 && c <= config.checkpoints[i - 1]) throw ConfigError("checkpoints: must be strictly increasing");
  }
  auto seeds = config.seeds;
  std::sort(seeds.begin(), seeds.end());
  if (std::adjacent_find(seeds.begin(), seeds.end()) != seeds.end()) throw ConfigError("seeds: duplicate seed");
  if (config.algorithm == Algorithm::ucb_delayed && (config.diagnostics.any() || config.verify))
    throw ConfigError("diagnostics: the scheduler checks do not apply to ucb_delayed");
}

bool RegretTrace::passed() const {
  return std::all_of(seeds.begin(), seeds.end(), [](const SeedTrace& s) { return !s.report || s.report->passed(); });
}

namespace {

// Reissues an error of the same type with the run context prepended.
template <typename Fn>
auto with_context(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const NonConvergence& e) {
    throw NonConvergence(where + ": " + e.what());
  } catch (const MultipleSkips& e) {
    throw MultipleSkips(where + ": " + e.what());
  } catch (const NoFreeSlot& e) {
    throw NoFreeSlot(where + ": " + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(where + ": " + e.what());
  } catch (const AlreadyResolved& e) {
    throw AlreadyResolved(where + ": " + e.what());
  } catch (const UnknownOrigin& e) {
    throw UnknownOrigin(where + ": " + e.what());
  } catch (const ContractError& e) {
    throw ContractError(where + ": " + e.what());
  }
}

void check_distribution(const SimplexPoint& x, std::int64_t t) {
  double total = 0.0;
  for (double p : x.probs) {
    if (!(p > 0.0)) throw InvariantError("round " + std::to_string(t) + ": x has a non-positive coordinate");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-10) throw InvariantError("round " + std::to_string(t) + ": x does not sum to 1");
}

// Pseudo-regret bookkeeping shared by every algorithm.
class RegretMeter {
 public:
  explicit RegretMeter(const EnvironmentInstance& env) : env_(env), arm_totals_(static_cast<std::size_t>(env.num_arms()), 0.0) {}

  void add(std::int64_t t, std::size_t arm) {
    const auto& losses = env_.losses();
    if (losses.kind == LossKind::stochastic) {
      stochastic_ += losses.gaps[arm];
      return;
    }
    learner_ += losses.at(t, arm);
    for (std::size_t i = 0; i < arm_totals_.size(); ++i) arm_totals_[i] += losses.at(t, i);
  }

  double value() const {
    if (env_.losses().kind == LossKind::stochastic) return stochastic_;
    return learner_ - *std::min_element(arm_totals_.begin(), arm_totals_.end());
  }

 private:
  const EnvironmentInstance& env_;
  double stochastic_ = 0.0;
  double learner_ = 0.0;
  std::vector<double> arm_totals_;
};

class CheckpointRecorder {
 public:
  CheckpointRecorder(SeedTrace& trace, std::span<const std::int64_t> checkpoints) : trace_(trace), checkpoints_(checkpoints) {
    trace_.checkpoints.assign(checkpoints.begin(), checkpoints.end());
    trace_.regret.reserve(checkpoints.size());
  }

  void observe(std::int64_t t, double regret, std::int64_t skips, std::int64_t sigma_hat_max, std::int64_t cum_outstanding) {
    if (next_ >= checkpoints_.size() || checkpoints_[next_] != t) return;
    trace_.regret.push_back(regret);
    trace_.skips.push_back(skips);
    trace_.sigma_hat_max.push_back(sigma_hat_max);
    trace_.cum_outstanding.push_back(cum_outstanding);
    ++next_;
  }

 private:
  SeedTrace& trace_;
  std::span<const std::int64_t> checkpoints_;
  std::size_t next_ = 0;
};

SeedTrace run_scheduler(const ExperimentConfig& config, const EnvironmentInstance& env, std::uint64_t seed) {
  const auto T = env.horizon();
  const int K = env.num_arms();
  SchedulerOptions options;
  options.num_arms = K;
  options.threshold = config.threshold;
  options.implicit_exploration = config.algorithm == Algorithm::bobw;
  Scheduler scheduler = config.algorithm == Algorithm::bobw
                            ? Scheduler(options)
                            : ftrl_no_ix_factory(NoIxConfig{K, config.threshold});

  Rng loss_rng = make_stream(seed, 0, StreamTag::losses);
  Rng action_rng = make_stream(seed, 0, StreamTag::actions);

  SeedTrace trace;
  trace.seed = seed;
  CheckpointRecorder recorder(trace, config.checkpoints);
  RegretMeter regret(env);

  const bool want_history = config.keep_history || config.verify || config.diagnostics.any();
  if (want_history) {
    trace.history.emplace(K, T);
    trace.history->threshold_scale = threshold_scale(config.threshold, K);
  }

  std::vector<double> observed(static_cast<std::size_t>(T) + 1, 0.0);
  std::vector<Arrival> arrivals;
  for (std::int64_t t = 1; t <= T; ++t) {
    with_context("seed " + std::to_string(seed) + ", round " + std::to_string(t), [&] {
      const SimplexPoint x = scheduler.begin_round();
      if (config.verify) check_distribution(x, t);
      const std::size_t arm = sample_arm(x, action_rng);
      scheduler.record_play(x, arm);
      observed[static_cast<std::size_t>(t)] = loss_at(env, t, arm, loss_rng);
      regret.add(t, arm);

      arrivals.clear();
      for (auto s : env.arrivals_at(t)) arrivals.push_back(Arrival{s, observed[static_cast<std::size_t>(s)]});
      const RoundOutcome outcome = scheduler.end_round(arrivals);
      if (trace.history) trace.history->record_round(x, outcome);

      const auto& st = scheduler.state();
      recorder.observe(t, regret.value(), st.skip_count, st.sigma_hat_running_max, st.cum_outstanding);
    });
  }

  const auto& st = scheduler.state();
  trace.skip_count = st.skip_count;
  trace.final_sigma_hat_max = st.sigma_hat_running_max;
  trace.final_cum_outstanding = st.cum_outstanding;
  trace.final_threshold = st.threshold;

  if (trace.history) {
    trace.history->ledger = st.ledger;
    if (config.verify || config.diagnostics.any()) {
      SuiteOptions suite;
      suite.skips = config.verify || config.diagnostics.skips;
      suite.drift = config.diagnostics.drift;
      suite.rearrange = config.diagnostics.rearrange;
      suite.lambda = config.diagnostics.lambda;
      suite.drift_budget = config.diagnostics.drift_budget;
      suite.seed = seed;
      suite.delays = env.delays().realized;
      trace.report = run_invariant_suite(*trace.history, suite);
    }
    if (!config.keep_history) trace.history.reset();
  }
  return trace;
}

SeedTrace run_ucb(const ExperimentConfig& config, const EnvironmentInstance& env, std::uint64_t seed) {
  const auto T = env.horizon();
  Rng loss_rng = make_stream(seed, 0, StreamTag::losses);

  SeedTrace trace;
  trace.seed = seed;
  CheckpointRecorder recorder(trace, config.checkpoints);
  RegretMeter regret(env);
  UcbState state(env.num_arms());

  // Outstanding accounting mirrors the scheduler's: rounds s < t whose loss
  // has not landed by round t. UCB never skips.
  std::vector<std::size_t> arms(static_cast<std::size_t>(T) + 1, 0);
  std::vector<double> observed(static_cast<std::size_t>(T) + 1, 0.0);
  std::vector<ArmLoss> ready;
  std::int64_t waiting = 0;  // rounds played with a loss still in flight
  std::int64_t sigma_hat_max = 0;
  std::int64_t cum_outstanding = 0;
  for (std::int64_t t = 1; t <= T; ++t) {
    const std::size_t arm = ucb_delayed_step(state, ready);
    arms[static_cast<std::size_t>(t)] = arm;
    observed[static_cast<std::size_t>(t)] = loss_at(env, t, arm, loss_rng);
    regret.add(t, arm);

    ready.clear();
    std::int64_t landing_old = 0;
    for (auto s : env.arrivals_at(t)) {
      ready.push_back(ArmLoss{arms[static_cast<std::size_t>(s)], observed[static_cast<std::size_t>(s)]});
      if (s < t) ++landing_old;
    }
    const std::int64_t sigma_hat = waiting - landing_old;
    cum_outstanding += sigma_hat;
    sigma_hat_max = std::max(sigma_hat_max, sigma_hat);
    waiting = sigma_hat + (env.delays().realized[static_cast<std::size_t>(t - 1)] > 0 ? 1 : 0);

    recorder.observe(t, regret.value(), 0, sigma_hat_max, cum_outstanding);
  }
  trace.final_sigma_hat_max = sigma_hat_max;
  trace.final_cum_outstanding = cum_outstanding;
  return trace;
}

}  // namespace

SeedTrace run_seed(const ExperimentConfig& config, const EnvironmentInstance& env, std::uint64_t seed) {
  if (config.algorithm == Algorithm::ucb_delayed) return run_ucb(config, env, seed);
  return run_scheduler(config, env, seed);
}

RegretTrace run_experiment(ExperimentConfig config) {
  validate(config);
  const EnvironmentInstance env = build_environment(config.environment);
  return run_experiment(std::move(config), env);
}

RegretTrace run_experiment(ExperimentConfig config, const EnvironmentInstance& env) {
  validate(config);
  if (env.num_arms() != config.environment.num_arms || env.horizon() != config.environment.horizon)
    throw ConfigError("environment: instance does not match the configured K and T");

  auto seeds = config.seeds;
  std::sort(seeds.begin(), seeds.end());

  RegretTrace out;
  out.algorithm = config.algorithm;
  out.num_arms = env.num_arms();
  out.horizon = env.horizon();
  out.seeds.resize(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());

  // Each unit writes only its own slot; no other shared mutable state.
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        out.seeds[i] = run_seed(config, env, seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.parallel), seeds.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

double order_statistic(std::vector<double> values, double q) {
  if (values.empty()) throw ContractError("order statistic of an empty sample");
  std::sort(values.begin(), values.end());
  const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(values.size() - 1)));
  return values[idx];
}

std::vector<SummaryRow> aggregate(std::span<const SeedTrace> traces) {
  if (traces.empty()) throw ContractError("aggregate needs at least one trace");
  const auto& cps = traces.front().checkpoints;
  for (const auto& tr : traces) {
    if (tr.checkpoints != cps) throw MismatchedCheckpoints("seed " + std::to_string(tr.seed) + " has different checkpoints");
    if (tr.regret.size() != cps.size())
      throw MismatchedCheckpoints("seed " + std::to_string(tr.seed) + " is missing checkpoint samples");
  }
  std::vector<SummaryRow> rows;
  rows.reserve(cps.size());
  std::vector<double> column(traces.size());
  for (std::size_t c = 0; c < cps.size(); ++c) {
    for (std::size_t i = 0; i < traces.size(); ++i) column[i] = traces[i].regret[c];
    rows.push_back(SummaryRow{cps[c], order_statistic(column, 0.25), order_statistic(column, 0.5),
                              order_statistic(column, 0.75)});
  }
  return rows;
}

// --- CSV ---------------------------------------------------------------------------

std::vector<CsvRow> csv_rows(const RegretTrace& trace) {
  std::vector<CsvRow> rows;
  const auto algo = to_string(trace.algorithm);
  for (const auto& s : trace.seeds)
    for (std::size_t c = 0; c < s.checkpoints.size() && c < s.regret.size(); ++c)
      rows.push_back(CsvRow{algo, trace.num_arms, trace.horizon, s.seed, s.checkpoints[c], s.regret[c], s.skips[c],
                            s.sigma_hat_max[c], s.cum_outstanding[c]});
  return rows;
}

std::string format_csv(std::span<const RegretTrace> traces) {
  std::string out = csv_header;
  out += '\n';
  char real[32];
  for (const auto& trace : traces) {
    for (const auto& r : csv_rows(trace)) {
      std::snprintf(real, sizeof real, "%.6g", r.regret);
      out += r.algo + ',' + std::to_string(r.num_arms) + ',' + std::to_string(r.horizon) + ',' + std::to_string(r.seed) +
             ',' + std::to_string(r.checkpoint) + ',' + real + ',' + std::to_string(r.skips) + ',' +
             std::to_string(r.sigma_hat_max) + ',' + std::to_string(r.cum_outstanding) + '\n';
    }
  }
  return out;
}

void write_csv(std::span<const RegretTrace> traces, const std::filesystem::path& path) {
  const auto text = format_csv(traces);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  f.close();
  if (!f) throw IoError("failed writing " + path.string());
}

namespace {

template <typename T>
T parse_number(const std::string& field, const char* column, std::size_t line) {
  std::istringstream in(field);
  T value{};
  in >> value;
  if (!in || !in.eof())
    throw IoError("line " + std::to_string(line) + ": column " + column + " has malformed value '" + field + "'");
  return value;
}

}  // namespace

std::vector<CsvRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != csv_header) throw IoError("CSV header does not match the expected schema");
  std::vector<CsvRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 9) throw IoError("line " + std::to_string(line_no) + ": expected 9 columns, got " + std::to_string(f.size()));
    CsvRow r;
    r.algo = f[0];
    r.num_arms = parse_number<int>(f[1], "K", line_no);
    r.horizon = parse_number<std::int64_t>(f[2], "T", line_no);
    r.seed = parse_number<std::uint64_t>(f[3], "seed", line_no);
    r.checkpoint = parse_number<std::int64_t>(f[4], "checkpoint", line_no);
    r.regret = parse_number<double>(f[5], "regret", line_no);
    r.skips = parse_number<std::int64_t>(f[6], "skips", line_no);
    r.sigma_hat_max = parse_number<std::int64_t>(f[7], "sigma_hat_max", line_no);
    r.cum_outstanding = parse_number<std::int64_t>(f[8], "cum_outstanding", line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<CsvRow> read_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_csv(buf.str());
}

}  // namespace bobw
