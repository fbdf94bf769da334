#pragma once

// Independent oracles shared by the unit and acceptance tests. None of these
// call into the code they check beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "bobw/environment.hpp"
#include "bobw/ftrl.hpp"
#include "bobw/rng.hpp"

namespace bobw::test {

/// <L, x> + F(x) written out directly from the definition.
inline double ftrl_objective(const std::vector<double>& x, const std::vector<double>& losses, double eta_inv,
                             double gamma_inv) {
  double v = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    v += losses[i] * x[i] - 2.0 * eta_inv * std::sqrt(x[i]);
    if (gamma_inv != 0.0) v += gamma_inv * x[i] * (std::log(x[i]) - 1.0);
  }
  return v;
}

/// K = 2: scans x_1 over a uniform grid of the given step on (0, 1).
inline std::vector<double> grid_oracle_k2(const std::vector<double>& losses, double eta_inv, double gamma_inv,
                                          double step = 1e-7) {
  const auto n = static_cast<std::int64_t>(std::llround(1.0 / step));
  double best = std::numeric_limits<double>::infinity();
  double arg = 0.5;
  std::vector<double> x(2);
  for (std::int64_t k = 1; k < n; ++k) {
    x[0] = static_cast<double>(k) * step;
    x[1] = 1.0 - x[0];
    const double v = ftrl_objective(x, losses, eta_inv, gamma_inv);
    if (v < best) {
      best = v;
      arg = x[0];
    }
  }
  return {arg, 1.0 - arg};
}

namespace detail {

// Scans (x_1, x_2) on the grid step * (i, j) for i, j in [lo, hi], x_3 = 1 - x_1 - x_2 > 0.
inline void scan_k3(const std::vector<double>& losses, double eta_inv, double gamma_inv, double step, std::int64_t i_lo,
                    std::int64_t i_hi, std::int64_t j_lo, std::int64_t j_hi, std::int64_t& bi, std::int64_t& bj) {
  const auto n = static_cast<std::int64_t>(std::llround(1.0 / step));
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> x(3);
  for (std::int64_t i = std::max<std::int64_t>(i_lo, 1); i <= std::min(i_hi, n - 2); ++i) {
    for (std::int64_t j = std::max<std::int64_t>(j_lo, 1); j <= std::min(j_hi, n - 1 - i); ++j) {
      x[0] = static_cast<double>(i) * step;
      x[1] = static_cast<double>(j) * step;
      x[2] = 1.0 - x[0] - x[1];
      if (!(x[2] > 0.0)) continue;
      const double v = ftrl_objective(x, losses, eta_inv, gamma_inv);
      if (v < best) {
        best = v;
        bi = i;
        bj = j;
      }
    }
  }
}

}  // namespace detail

/// K = 3: full grid at `coarse`, then repeated local grids ten times finer
/// around the incumbent until the step reaches `fine`. The objective is strictly
/// convex, so the minimizer stays inside the refinement window.
inline std::vector<double> grid_oracle_k3(const std::vector<double>& losses, double eta_inv, double gamma_inv,
                                          double coarse = 1e-4, double fine = 1e-7, std::int64_t window = 20) {
  double step = coarse;
  const auto n = static_cast<std::int64_t>(std::llround(1.0 / step));
  std::int64_t bi = 1, bj = 1;
  detail::scan_k3(losses, eta_inv, gamma_inv, step, 1, n, 1, n, bi, bj);
  while (step > fine * 1.5) {
    const double cx = static_cast<double>(bi) * step;
    const double cy = static_cast<double>(bj) * step;
    step /= 10.0;
    const auto ci = static_cast<std::int64_t>(std::llround(cx / step));
    const auto cj = static_cast<std::int64_t>(std::llround(cy / step));
    detail::scan_k3(losses, eta_inv, gamma_inv, step, ci - window, ci + window, cj - window, cj + window, bi, bj);
  }
  const double x1 = static_cast<double>(bi) * step;
  const double x2 = static_cast<double>(bj) * step;
  return {x1, x2, 1.0 - x1 - x2};
}

inline double linf(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Exhaustive min over all subsets S of |S| + sqrt(D_{not S} * scale).
inline double exhaustive_skip_min(const std::vector<std::int64_t>& delays, double scale) {
  const std::size_t n = delays.size();
  const std::int64_t total = std::accumulate(delays.begin(), delays.end(), std::int64_t{0});
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::int64_t kept = total;
    int size = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        kept -= delays[i];
        ++size;
      }
    best = std::min(best, size + std::sqrt(static_cast<double>(kept) * scale));
  }
  return best;
}

/// Outstanding-count and skipping recursion re-derived from the delay vector
/// alone: sigma_hat_t counts unskipped s <= t-1 with s + d_s > t, and an
/// outstanding s is skipped once t - s >= sqrt(D_t / c).
struct ReferenceAccounting {
  std::vector<std::int64_t> sigma_hat;  // [t - 1]
  std::vector<std::int64_t> cum;        // [t - 1]
  std::vector<std::int64_t> skipped_at; // [s - 1], -1 if never
  std::vector<int> skips_per_round;     // [t - 1]
};

inline ReferenceAccounting reference_accounting(const std::vector<std::int64_t>& delays, double c) {
  const auto T = static_cast<std::int64_t>(delays.size());
  ReferenceAccounting r;
  r.sigma_hat.assign(static_cast<std::size_t>(T), 0);
  r.cum.assign(static_cast<std::size_t>(T), 0);
  r.skipped_at.assign(static_cast<std::size_t>(T), -1);
  r.skips_per_round.assign(static_cast<std::size_t>(T), 0);
  std::int64_t D = 0;
  for (std::int64_t t = 1; t <= T; ++t) {
    std::int64_t sigma = 0;
    for (std::int64_t s = 1; s < t; ++s)
      if (r.skipped_at[static_cast<std::size_t>(s - 1)] < 0 && s + delays[static_cast<std::size_t>(s - 1)] > t) ++sigma;
    D += sigma;
    r.sigma_hat[static_cast<std::size_t>(t - 1)] = sigma;
    r.cum[static_cast<std::size_t>(t - 1)] = D;
    const double threshold = std::sqrt(static_cast<double>(D) / c);
    for (std::int64_t s = 1; s < t; ++s) {
      if (r.skipped_at[static_cast<std::size_t>(s - 1)] >= 0) continue;
      if (s + delays[static_cast<std::size_t>(s - 1)] <= t) continue;  // arrived
      if (static_cast<double>(t - s) >= threshold) {
        r.skipped_at[static_cast<std::size_t>(s - 1)] = t;
        ++r.skips_per_round[static_cast<std::size_t>(t - 1)];
      }
    }
  }
  return r;
}

/// Random environment used by the property corpora. Varies K, the loss model
/// and the delay model; everything is a function of `seed`.
inline EnvironmentConfig random_environment(std::uint64_t seed, std::int64_t horizon) {
  Rng rng = make_stream(seed, 7, StreamTag::environment);
  auto pick = [&](std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(hi - lo + 1));
  };
  EnvironmentConfig c;
  c.num_arms = static_cast<int>(pick(2, 5));
  c.horizon = horizon;
  c.seed = seed;
  if (pick(0, 1) == 0) {
    c.loss.kind = LossKind::stochastic;
    for (int i = 0; i < c.num_arms; ++i) c.loss.means.push_back(0.2 + 0.6 * uniform01(rng));
    c.loss.means[static_cast<std::size_t>(pick(0, c.num_arms - 1))] = 0.1;
  } else {
    c.loss.kind = LossKind::adversarial;
    c.loss.generator = AdversarialGenerator::two_phase;
    c.loss.gap = 0.1 + 0.8 * uniform01(rng);
  }
  switch (pick(0, 4)) {
    case 0:
      c.delay.kind = DelayKind::constant;
      c.delay.value = pick(0, 60);
      break;
    case 1:
      c.delay.kind = DelayKind::uniform_random;
      c.delay.lo = pick(0, 20);
      c.delay.hi = c.delay.lo + pick(0, 150);
      break;
    case 2:
      c.delay.kind = DelayKind::outlier_front;
      break;
    case 3:
      c.delay.kind = DelayKind::single_outlier;
      break;
    default:
      c.delay.kind = DelayKind::uniform_random;
      c.delay.lo = 0;
      c.delay.hi = pick(1, horizon);
      break;
  }
  return c;
}

}  // namespace bobw::test
