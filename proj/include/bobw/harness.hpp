#pragma once

// Experiment orchestration: drives an algorithm through an environment for a
// list of seeds, samples pseudo-regret at checkpoint rounds, aggregates the
// traces and writes them as CSV.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bobw/diagnostics.hpp"
#include "bobw/environment.hpp"
#include "bobw/scheduler.hpp"

namespace bobw {

enum class Algorithm { bobw, ftrl_no_ix, ucb_delayed };

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);  // throws ConfigError

struct DiagnosticsFlags {
  bool skips = false;
  bool drift = false;
  bool rearrange = false;
  bool lambda = false;
  std::int64_t drift_budget = 100000;

  bool any() const { return skips || drift || rearrange || lambda; }
};

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::bobw;
  EnvironmentConfig environment;
  std::vector<std::uint64_t> seeds{0};
  std::vector<std::int64_t> checkpoints;  // empty: powers of two up to T, plus T
  ThresholdRule threshold = ThresholdRule::standard;
  DiagnosticsFlags diagnostics;
  bool verify = false;        // run the skip invariants on every seed
  bool keep_history = false;  // keep per-round distributions in the trace
  int parallel = 1;           // worker threads over seeds
  std::filesystem::path output;
};

/// Powers of two below T, then T.
std::vector<std::int64_t> default_checkpoints(std::int64_t horizon);

/// K >= 2, T >= 1, >= 1 seed, checkpoints sorted, unique and in [1, T].
/// Fills in default checkpoints. Throws ConfigError naming the field.
void validate(ExperimentConfig& config);

struct SeedTrace {
  std::uint64_t seed = 0;
  std::vector<std::int64_t> checkpoints;
  std::vector<double> regret;  // cumulative pseudo-regret at each checkpoint
  std::vector<std::int64_t> skips;
  std::vector<std::int64_t> sigma_hat_max;
  std::vector<std::int64_t> cum_outstanding;
  // Run metadata at T.
  std::int64_t skip_count = 0;
  std::int64_t final_sigma_hat_max = 0;
  std::int64_t final_cum_outstanding = 0;
  double final_threshold = 0.0;
  std::optional<RunHistory> history;
  std::optional<Report> report;  // present when verify or diagnostics are on
};

struct RegretTrace {
  Algorithm algorithm = Algorithm::bobw;
  int num_arms = 2;
  std::int64_t horizon = 0;
  std::vector<SeedTrace> seeds;  // sorted by seed

  bool passed() const;  // every attached report passed
};

/// Runs every seed (in parallel when config.parallel > 1). Scheduler and solver
/// errors propagate with the seed and round prepended to the message.
RegretTrace run_experiment(ExperimentConfig config);

/// Same, against an environment built by the caller.
RegretTrace run_experiment(ExperimentConfig config, const EnvironmentInstance& env);

/// One seed, sequentially. Exposed for tests.
SeedTrace run_seed(const ExperimentConfig& config, const EnvironmentInstance& env, std::uint64_t seed);

struct SummaryRow {
  std::int64_t checkpoint = 0;
  double lower_quartile = 0.0;
  double median = 0.0;
  double upper_quartile = 0.0;
};

/// Order statistic sorted[floor(q * (n - 1))], no interpolation.
double order_statistic(std::vector<double> values, double q);

/// Lower median and quartiles per checkpoint. Throws MismatchedCheckpoints.
std::vector<SummaryRow> aggregate(std::span<const SeedTrace> traces);

struct CsvRow {
  std::string algo;
  int num_arms = 0;
  std::int64_t horizon = 0;
  std::uint64_t seed = 0;
  std::int64_t checkpoint = 0;
  double regret = 0.0;
  std::int64_t skips = 0;
  std::int64_t sigma_hat_max = 0;
  std::int64_t cum_outstanding = 0;

  bool operator==(const CsvRow&) const = default;
};

inline constexpr const char* csv_header = "algo,K,T,seed,checkpoint,regret,skips,sigma_hat_max,cum_outstanding";

std::vector<CsvRow> csv_rows(const RegretTrace& trace);
std::string format_csv(std::span<const RegretTrace> traces);
/// Throws IoError when the file cannot be written.
void write_csv(std::span<const RegretTrace> traces, const std::filesystem::path& path);
/// Throws IoError on unreadable files or a schema mismatch.
std::vector<CsvRow> read_csv(const std::filesystem::path& path);
std::vector<CsvRow> parse_csv(const std::string& text);

// --- Configuration files ----------------------------------------------------------

/// Prefix of the environment variables that override config keys, e.g.
/// BOBW_HORIZON=20000.
inline constexpr const char* env_override_prefix = "BOBW_";

/// Flat JSON object whose keys mirror ExperimentConfig. Unknown keys are an
/// error. Environment overrides are applied before parsing.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text, bool apply_env_overrides = true);

/// Parses "1,2,5-8" into a seed list.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace bobw
