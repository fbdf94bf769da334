#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bobw/rng.hpp"

namespace bobw {

enum class LossKind { stochastic, adversarial };

/// Named generators for oblivious adversarial sequences.
enum class AdversarialGenerator {
  zeros,      // every loss is 0
  two_phase,  // gap flip between arms 0 and 1 at a fixed fraction of T
  file,       // K comma-separated reals per line
};

struct LossSpec {
  LossKind kind = LossKind::stochastic;
  std::vector<double> means;  // stochastic: Bernoulli means
  AdversarialGenerator generator = AdversarialGenerator::two_phase;
  double gap = 0.2;                    // two_phase: loss gap between best arm and the rest
  double switch_fraction = 1.0 / 3.0;  // two_phase: phase 1 covers rounds <= floor(fraction * T)
  std::filesystem::path file;
  bool allow_equal_means = false;      // disables the unique-best-arm check
};

enum class DelayKind { constant, uniform_random, outlier_front, single_outlier, from_file };

struct DelaySpec {
  DelayKind kind = DelayKind::constant;
  std::int64_t value = 0;      // constant
  std::int64_t lo = 0;         // uniform_random
  std::int64_t hi = 0;         // uniform_random
  std::int64_t magnitude = -1; // outliers; -1 means T
  std::int64_t count = -1;     // outlier_front; -1 means floor(sqrt(T))
  std::filesystem::path file;
};

struct EnvironmentConfig {
  int num_arms = 2;
  std::int64_t horizon = 1;
  LossSpec loss;
  DelaySpec delay;
  std::uint64_t seed = 0;
};

struct LossModel {
  LossKind kind = LossKind::stochastic;
  int num_arms = 0;
  std::int64_t horizon = 0;
  std::vector<double> means;
  std::vector<double> sequence;  // adversarial, row-major T x K
  std::vector<double> gaps;      // stochastic
  std::size_t best_arm = 0;

  double at(std::int64_t t, std::size_t arm) const {
    return sequence[static_cast<std::size_t>(t - 1) * static_cast<std::size_t>(num_arms) + arm];
  }
};

struct DelayModel {
  DelaySpec spec;
  std::vector<std::int64_t> realized;  // realized[t - 1] = d_t
  std::int64_t d_max = 0;
  std::int64_t total_delay = 0;
  std::int64_t sigma_max = 0;
};

/// sigma_t = |{s <= t : s + d_s > t}|, pre-skipping ground truth.
struct SigmaSeries {
  std::vector<std::int64_t> sigma;  // sigma[t - 1]
  std::int64_t sigma_max = 0;
};

class EnvironmentInstance {
 public:
  EnvironmentInstance(LossModel losses, DelayModel delays);

  const LossModel& losses() const { return losses_; }
  const DelayModel& delays() const { return delays_; }
  int num_arms() const { return losses_.num_arms; }
  std::int64_t horizon() const { return losses_.horizon; }

  /// Origin rounds s with s + d_s = t, in increasing order. Empty past T.
  std::span<const std::int64_t> arrivals_at(std::int64_t t) const;

 private:
  LossModel losses_;
  DelayModel delays_;
  std::vector<std::size_t> offsets_;  // CSR over rounds 1..T
  std::vector<std::int64_t> origins_;
};

/// Throws ConfigError naming the offending field.
EnvironmentInstance build_environment(const EnvironmentConfig& config);

/// Stochastic: Bernoulli(mean) from the run's loss stream. Adversarial: the
/// fixed sequence entry; rng is not touched.
double loss_at(const EnvironmentInstance& env, std::int64_t t, std::size_t arm, Rng& rng);

SigmaSeries ground_truth_sigma(std::span<const std::int64_t> delays);
SigmaSeries ground_truth_sigma(const EnvironmentInstance& env);

/// One nonnegative integer per line; exactly `horizon` lines.
std::vector<std::int64_t> read_delay_file(const std::filesystem::path& path, std::int64_t horizon);

/// K comma-separated reals in [0, 1] per line; exactly `horizon` lines. Row-major.
std::vector<double> read_loss_file(const std::filesystem::path& path, std::int64_t horizon, int num_arms);

std::string to_string(LossKind kind);
std::string to_string(DelayKind kind);
std::string to_string(AdversarialGenerator generator);

}  // namespace bobw
