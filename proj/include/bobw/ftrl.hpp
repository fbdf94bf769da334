#pragma once

// Per-round FTRL step over the probability simplex with the hybrid
// regularizer
//
//   F(x) = -2 * eta_inv * sum_i sqrt(x_i) + gamma_inv * sum_i x_i (log x_i - 1)
//
// (negative 1/2-Tsallis entropy plus negative Shannon entropy, each with its
// own inverse learning rate), and sampling from the resulting distribution.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bobw/rng.hpp"

namespace bobw {

/// Probability vector over K arms. Entries are strictly positive and sum to 1
/// within 1e-10 when produced by solve_ftrl.
struct SimplexPoint {
  std::vector<double> probs;

  static SimplexPoint uniform(std::size_t num_arms);

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
  bool operator==(const SimplexPoint&) const = default;
};

struct RegularizerParams {
  double eta_inv = 1.0;    // Tsallis term, sqrt(t)
  double gamma_inv = 0.0;  // Shannon term, sqrt(49 D / log K); 0 disables it
  int num_arms = 2;

  /// Learning rates for round t given the cumulative outstanding count D
  /// available before the play.
  static RegularizerParams for_round(std::int64_t round, std::int64_t cum_outstanding, int num_arms);
};

/// F(x). With gamma_inv == 0 the entropy sum is omitted rather than evaluated.
double regularizer_value(const SimplexPoint& x, const RegularizerParams& params);

/// Coordinate derivative f'(x) = -eta_inv / sqrt(x) + gamma_inv * log(x).
double regularizer_slope(double x, const RegularizerParams& params);

struct FtrlSolution {
  SimplexPoint point;
  double multiplier = 0.0;  // mu with f'(x_i) = mu - losses_i for every i
  int iterations = 0;       // outer iterations used
};

/// argmin over the simplex of <losses, x> + F(x). Throws NonConvergence when the
/// iteration budget runs out or a coordinate underflows below 1e-300.
FtrlSolution solve_ftrl(std::span<const double> losses, const RegularizerParams& params);

/// Inverse-CDF draw: cumulative scan in index order, first i with u < cdf_i.
std::size_t sample_arm(const SimplexPoint& x, Rng& rng);

}  // namespace bobw
