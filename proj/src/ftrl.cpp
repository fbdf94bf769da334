#include "bobw/ftrl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bobw/errors.hpp"

namespace bobw {

namespace {

constexpr int kOuterBudget = 200;
constexpr int kInnerBudget = 100;
constexpr double kMinProb = 1e-300;
constexpr double kSumTarget = 1e-13;
constexpr double kSumTolerance = 1e-10;

const double kLogMinProb = std::log(kMinProb);

void validate(std::span<const double> losses, const RegularizerParams& p) {
  if (p.num_arms < 2) throw ContractError("regularizer needs at least 2 arms");
  if (losses.size() != static_cast<std::size_t>(p.num_arms))
    throw ContractError("loss vector has " + std::to_string(losses.size()) + " entries, expected " +
                        std::to_string(p.num_arms));
  if (!(p.eta_inv >= 0.0) || !(p.gamma_inv >= 0.0) || !std::isfinite(p.eta_inv) || !std::isfinite(p.gamma_inv))
    throw ContractError("learning-rate inverses must be finite and nonnegative");
  if (p.eta_inv == 0.0 && p.gamma_inv == 0.0) throw ContractError("regularizer is identically zero");
  for (double l : losses)
    if (!std::isfinite(l)) throw ContractError("loss estimates must be finite");
}

// Solves f'(x) = target on (1e-300, 1]; values of target at or above f'(1)
// clamp to 1. Works on y = log x, where
//   h(y) = -eta e^{-y/2} + gamma y - target
// is increasing and concave, so Newton is monotone from the left after at
// most one step. The bracket keeps it honest anyway.
double invert_slope(double target, double eta, double gamma) {
  if (target >= -eta) return 1.0;

  auto h = [&](double y) { return -eta * std::exp(-0.5 * y) + gamma * y - target; };

  double lo = kLogMinProb;
  double hi = 0.0;
  if (h(lo) > 0.0) throw NonConvergence("probability underflow: coordinate below 1e-300");

  double y;
  if (eta > 0.0) {
    y = 2.0 * std::log(eta / -target);
  } else {
    y = target / gamma;
  }
  y = std::clamp(y, lo, hi);

  for (int it = 0; it < kInnerBudget; ++it) {
    const double hv = h(y);
    if (hv == 0.0) return std::exp(y);
    if (hv < 0.0) {
      lo = y;
    } else {
      hi = y;
    }
    const double slope = 0.5 * eta * std::exp(-0.5 * y) + gamma;
    const double step = hv / slope;
    // Test the step before the bracket: a converged Newton step can round
    // onto a bracket end, and bisecting from there would undo the progress.
    const double tol = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(y));
    if (std::abs(step) <= tol || hi - lo <= tol) return std::exp(y);
    double next = y - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    y = next;
  }
  throw NonConvergence("inner coordinate solve exhausted its iteration budget");
}

struct Evaluation {
  double sum = 0.0;
  double slope = 0.0;  // d(sum)/d(mu)
};

Evaluation evaluate(double mu, std::span<const double> losses, const RegularizerParams& p, std::vector<double>& x) {
  Evaluation e;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    x[i] = invert_slope(mu - losses[i], p.eta_inv, p.gamma_inv);
    e.sum += x[i];
    if (x[i] < 1.0) e.slope += 1.0 / (0.5 * p.eta_inv / (x[i] * std::sqrt(x[i])) + p.gamma_inv / x[i]);
  }
  return e;
}

}  // namespace

SimplexPoint SimplexPoint::uniform(std::size_t num_arms) {
  return SimplexPoint{std::vector<double>(num_arms, 1.0 / static_cast<double>(num_arms))};
}

RegularizerParams RegularizerParams::for_round(std::int64_t round, std::int64_t cum_outstanding, int num_arms) {
  RegularizerParams p;
  p.num_arms = num_arms;
  p.eta_inv = std::sqrt(static_cast<double>(round));
  p.gamma_inv = cum_outstanding > 0
                    ? std::sqrt(49.0 * static_cast<double>(cum_outstanding) / std::log(static_cast<double>(num_arms)))
                    : 0.0;
  return p;
}

double regularizer_value(const SimplexPoint& x, const RegularizerParams& params) {
  double tsallis = 0.0;
  for (double xi : x.probs) tsallis += std::sqrt(xi);
  double value = -2.0 * params.eta_inv * tsallis;
  if (params.gamma_inv != 0.0) {
    double entropy = 0.0;
    for (double xi : x.probs) entropy += xi * (std::log(xi) - 1.0);
    value += params.gamma_inv * entropy;
  }
  return value;
}

double regularizer_slope(double x, const RegularizerParams& params) {
  double s = -params.eta_inv / std::sqrt(x);
  if (params.gamma_inv != 0.0) s += params.gamma_inv * std::log(x);
  return s;
}

FtrlSolution solve_ftrl(std::span<const double> losses, const RegularizerParams& params) {
  validate(losses, params);
  const auto k = losses.size();
  const auto [min_it, max_it] = std::minmax_element(losses.begin(), losses.end());

  // Sum(mu) is continuous and nondecreasing; at lo the best arm sits at 1/K and
  // every other coordinate below it, at hi every coordinate clamps to 1.
  double lo = *min_it + regularizer_slope(1.0 / static_cast<double>(k), params) - 1.0;
  double hi = *max_it + regularizer_slope(1.0, params) + 1.0;

  std::vector<double> x(k);
  for (int widen = 0; evaluate(lo, losses, params, x).sum > 1.0; ++widen) {
    if (widen > 60) throw NonConvergence("could not bracket the simplex multiplier from below");
    lo -= 2.0 * (hi - lo);
  }
  for (int widen = 0; evaluate(hi, losses, params, x).sum < 1.0; ++widen) {
    if (widen > 60) throw NonConvergence("could not bracket the simplex multiplier from above");
    hi += 2.0 * (hi - lo);
  }

  double mu = lo + 1.0;
  if (!(mu > lo && mu < hi)) mu = 0.5 * (lo + hi);

  FtrlSolution out;
  for (int it = 1; it <= kOuterBudget; ++it) {
    const Evaluation e = evaluate(mu, losses, params, x);
    const double excess = e.sum - 1.0;
    out.iterations = it;
    if (std::abs(excess) <= kSumTarget) break;
    if (excess < 0.0) {
      lo = mu;
    } else {
      hi = mu;
    }
    double next = e.slope > 0.0 ? mu - excess / e.slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == mu || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mu))) {
      mu = next;
      evaluate(mu, losses, params, x);
      break;
    }
    mu = next;
    if (it == kOuterBudget) throw NonConvergence("simplex multiplier search exhausted its iteration budget");
  }

  double total = 0.0;
  for (double xi : x) {
    if (!(xi > 0.0)) throw NonConvergence("probability underflow in FTRL solution");
    total += xi;
  }
  if (std::abs(total - 1.0) > kSumTolerance)
    throw NonConvergence("FTRL solution misses the simplex by " + std::to_string(total - 1.0));

  out.point.probs = std::move(x);
  out.multiplier = mu;
  return out;
}

std::size_t sample_arm(const SimplexPoint& x, Rng& rng) {
  const double u = uniform01(rng);
  double cdf = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cdf += x.probs[i];
    if (x.probs[i] > 0.0) last_positive = i;
    if (u < cdf) return i;
  }
  // Rounding left the cdf short of u.
  return last_positive;
}

}  // namespace bobw
