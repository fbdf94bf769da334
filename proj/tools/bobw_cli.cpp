// Command-line front end: run experiments, run the diagnostic checks on
// recorded runs, and solve the offline skip-set problem for a delay file.
//
// Exit codes: 0 success, 1 invariant violation, 2 configuration error,
// 3 solver failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "bobw/diagnostics.hpp"
#include "bobw/environment.hpp"
#include "bobw/errors.hpp"
#include "bobw/harness.hpp"

namespace {

enum ExitCode { ok = 0, invariant_violation = 1, config_error = 2, solver_failure = 3 };

struct RunFlags {
  std::string config;
  std::string seeds;
  std::string out;
  int parallel = 0;
  bool verify = false;
};

bobw::ExperimentConfig load(const RunFlags& flags) {
  auto config = bobw::load_config(flags.config);
  if (!flags.seeds.empty()) config.seeds = bobw::parse_seed_list(flags.seeds);
  if (!flags.out.empty()) config.output = flags.out;
  if (flags.parallel > 0) config.parallel = flags.parallel;
  if (flags.verify) config.verify = true;
  return config;
}

void print_summary(const bobw::RegretTrace& trace) {
  std::fprintf(stderr, "%-10s %12s %12s %12s\n", "checkpoint", "q25", "median", "q75");
  for (const auto& row : bobw::aggregate(trace.seeds))
    std::fprintf(stderr, "%-10lld %12.6g %12.6g %12.6g\n", static_cast<long long>(row.checkpoint), row.lower_quartile,
                 row.median, row.upper_quartile);
}

void print_reports(const bobw::RegretTrace& trace) {
  for (const auto& s : trace.seeds) {
    if (!s.report) continue;
    std::cout << "# seed=" << s.seed << " skips=" << s.skip_count << " sigma_hat_max=" << s.final_sigma_hat_max
              << " cum_outstanding=" << s.final_cum_outstanding << '\n'
              << s.report->to_text();
  }
}

int cmd_run(const RunFlags& flags) {
  const auto config = load(flags);
  const auto trace = bobw::run_experiment(config);
  const bobw::RegretTrace traces[] = {trace};
  if (config.output.empty())
    std::cout << bobw::format_csv(traces);
  else
    bobw::write_csv(traces, config.output);
  print_summary(trace);
  if (!trace.passed()) {
    print_reports(trace);
    return invariant_violation;
  }
  return ok;
}

int cmd_diagnose(const RunFlags& flags, const std::string& checks) {
  auto config = load(flags);
  config.diagnostics = bobw::DiagnosticsFlags{};
  config.diagnostics.drift_budget = bobw::load_config(flags.config).diagnostics.drift_budget;
  std::istringstream in(checks);
  for (std::string item; std::getline(in, item, ',');) {
    if (item == "skips") config.diagnostics.skips = true;
    else if (item == "drift") config.diagnostics.drift = true;
    else if (item == "rearrange") config.diagnostics.rearrange = true;
    else if (item == "lambda") config.diagnostics.lambda = true;
    else if (!item.empty()) throw bobw::ConfigError("checks: unknown check '" + item + "'");
  }
  const auto trace = bobw::run_experiment(config);
  print_reports(trace);
  return trace.passed() ? ok : invariant_violation;
}

int cmd_minimize(const std::string& path, int arms) {
  std::ifstream f(path);
  if (!f) throw bobw::ConfigError("delays: cannot open " + path);
  std::int64_t lines = 0;
  for (std::string line; std::getline(f, line);) ++lines;
  const auto delays = bobw::read_delay_file(path, lines);
  const auto m = bobw::skip_set_minimizer(delays, arms);
  std::cout << "skip_count=" << m.best_count << " value=" << m.best_value << " scale=" << m.scale
            << " sqrt_total_delay=" << m.sqrt_total_delay << " unscaled_min=" << m.unscaled_min
            << " d_max=" << m.d_max << " delay_floor=" << (m.delay_floor_holds ? "holds" : "violated") << '\n';
  return m.delay_floor_holds ? ok : invariant_violation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Best-of-both-worlds bandits with delayed feedback"};
  app.require_subcommand(1);

  RunFlags flags;
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seeds", flags.seeds, "Seed list, e.g. 0-19 or 1,4,9");
    sub->add_option("--out", flags.out, "CSV output path (stdout when absent)");
    sub->add_option("--parallel", flags.parallel, "Worker threads over seeds");
    sub->add_flag("--verify", flags.verify, "Check the scheduler invariants on every seed");
  };

  auto* run = app.add_subcommand("run", "Run an experiment and write the regret CSV");
  add_run_flags(run);

  std::string checks = "skips";
  auto* diagnose = app.add_subcommand("diagnose", "Run the diagnostic checks on each seed's run");
  add_run_flags(diagnose);
  diagnose->add_option("--checks", checks, "Comma-separated subset of drift,rearrange,lambda,skips");

  std::string delays;
  int arms = 2;
  auto* minimize = app.add_subcommand("minimize-skips", "Offline skip-set minimizer for a delay file");
  minimize->add_option("--delays", delays, "One delay per line")->required();
  minimize->add_option("--arms", arms, "Number of arms K")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*run) return cmd_run(flags);
    if (*diagnose) return cmd_diagnose(flags, checks);
    return cmd_minimize(delays, arms);
  } catch (const bobw::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const bobw::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return config_error;
  } catch (const bobw::NonConvergence& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return solver_failure;
  } catch (const bobw::InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return invariant_violation;
  } catch (const std::logic_error& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return invariant_violation;
  }
}
