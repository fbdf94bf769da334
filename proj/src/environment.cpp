#include "bobw/environment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string_view>

#include "bobw/errors.hpp"

namespace bobw {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  // A trailing newline is not an extra round.
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line + 1);
}

void check_line_count(const std::filesystem::path& path, std::size_t lines, std::int64_t horizon) {
  if (static_cast<std::int64_t>(lines) != horizon)
    throw ConfigError(path.string() + " has " + std::to_string(lines) + " lines, expected T = " +
                      std::to_string(horizon));
}

void validate(const EnvironmentConfig& c) {
  if (c.num_arms < 2) throw ConfigError("arms: K must be >= 2, got " + std::to_string(c.num_arms));
  if (c.horizon < 1) throw ConfigError("horizon: T must be >= 1, got " + std::to_string(c.horizon));
  const auto& d = c.delay;
  switch (d.kind) {
    case DelayKind::constant:
      if (d.value < 0) throw ConfigError("delay_value: must be >= 0");
      break;
    case DelayKind::uniform_random:
      if (d.lo < 0 || d.hi < d.lo) throw ConfigError("delay_lo/delay_hi: need 0 <= lo <= hi");
      break;
    case DelayKind::outlier_front:
    case DelayKind::single_outlier:
      if (d.magnitude < -1) throw ConfigError("outlier_magnitude: must be >= 0");
      if (d.count < -1) throw ConfigError("outlier_count: must be >= 0");
      break;
    case DelayKind::from_file:
      if (d.file.empty()) throw ConfigError("delay_file: required for delay = from_file");
      break;
  }
}

LossModel build_losses(const EnvironmentConfig& c) {
  const auto k = static_cast<std::size_t>(c.num_arms);
  const auto& spec = c.loss;
  LossModel m;
  m.kind = spec.kind;
  m.num_arms = c.num_arms;
  m.horizon = c.horizon;

  if (spec.kind == LossKind::stochastic) {
    if (spec.means.size() != k)
      throw ConfigError("means: expected " + std::to_string(k) + " values, got " + std::to_string(spec.means.size()));
    for (double mu : spec.means)
      if (!(mu >= 0.0 && mu <= 1.0)) throw ConfigError("means: every mean must lie in [0, 1]");
    m.means = spec.means;
    const auto best = std::min_element(m.means.begin(), m.means.end());
    m.best_arm = static_cast<std::size_t>(best - m.means.begin());
    m.gaps.resize(k);
    for (std::size_t i = 0; i < k; ++i) m.gaps[i] = m.means[i] - *best;
    if (!spec.allow_equal_means) {
      for (std::size_t i = 0; i < k; ++i)
        if (i != m.best_arm && m.gaps[i] <= 0.0)
          throw ConfigError("means: the best arm must be unique (arm " + std::to_string(i) + " ties arm " +
                            std::to_string(m.best_arm) + ")");
    }
    return m;
  }

  const auto rows = static_cast<std::size_t>(c.horizon);
  switch (spec.generator) {
    case AdversarialGenerator::zeros:
      m.sequence.assign(rows * k, 0.0);
      break;
    case AdversarialGenerator::two_phase: {
      if (!(spec.gap > 0.0 && spec.gap <= 1.0)) throw ConfigError("gap: must lie in (0, 1]");
      if (!(spec.switch_fraction > 0.0 && spec.switch_fraction < 1.0))
        throw ConfigError("switch_fraction: must lie in (0, 1)");
      // Fixed in advance from the environment seed, independent of any play.
      Rng rng = make_stream(c.seed, 0, StreamTag::environment);
      const auto switch_round = static_cast<std::int64_t>(std::floor(spec.switch_fraction * static_cast<double>(c.horizon)));
      const double good = 0.5 - 0.5 * spec.gap;
      const double bad = 0.5 + 0.5 * spec.gap;
      m.sequence.resize(rows * k);
      for (std::int64_t t = 1; t <= c.horizon; ++t) {
        const std::size_t best = t <= switch_round ? 0 : 1;
        for (std::size_t i = 0; i < k; ++i) {
          const double mean = i == best ? good : bad;
          m.sequence[static_cast<std::size_t>(t - 1) * k + i] = uniform01(rng) < mean ? 1.0 : 0.0;
        }
      }
      break;
    }
    case AdversarialGenerator::file:
      if (spec.file.empty()) throw ConfigError("loss_file: required for loss_generator = file");
      m.sequence = read_loss_file(spec.file, c.horizon, c.num_arms);
      break;
  }

  std::vector<double> totals(k, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < k; ++i) totals[i] += m.sequence[r * k + i];
  m.best_arm = static_cast<std::size_t>(std::min_element(totals.begin(), totals.end()) - totals.begin());
  return m;
}

DelayModel build_delays(const EnvironmentConfig& c) {
  DelayModel m;
  m.spec = c.delay;
  const auto T = c.horizon;
  auto& d = m.realized;
  const std::int64_t magnitude = c.delay.magnitude < 0 ? T : c.delay.magnitude;

  switch (c.delay.kind) {
    case DelayKind::constant:
      d.assign(static_cast<std::size_t>(T), c.delay.value);
      break;
    case DelayKind::uniform_random: {
      Rng rng = make_stream(c.seed, 1, StreamTag::environment);
      const auto span = static_cast<std::uint64_t>(c.delay.hi - c.delay.lo + 1);
      d.resize(static_cast<std::size_t>(T));
      for (auto& x : d) x = c.delay.lo + static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(span));
      break;
    }
    case DelayKind::outlier_front: {
      const std::int64_t count =
          c.delay.count < 0 ? static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(T)))) : c.delay.count;
      d.assign(static_cast<std::size_t>(T), 0);
      for (std::int64_t t = 0; t < std::min(count, T); ++t) d[static_cast<std::size_t>(t)] = magnitude;
      break;
    }
    case DelayKind::single_outlier:
      d.assign(static_cast<std::size_t>(T), 0);
      d[0] = magnitude;
      break;
    case DelayKind::from_file:
      d = read_delay_file(c.delay.file, T);
      break;
  }

  // Derived quantities come from the realized vector only.
  m.d_max = *std::max_element(d.begin(), d.end());
  m.total_delay = std::accumulate(d.begin(), d.end(), std::int64_t{0});
  m.sigma_max = ground_truth_sigma(d).sigma_max;
  return m;
}

}  // namespace

EnvironmentInstance::EnvironmentInstance(LossModel losses, DelayModel delays)
    : losses_(std::move(losses)), delays_(std::move(delays)) {
  const auto T = losses_.horizon;
  if (static_cast<std::int64_t>(delays_.realized.size()) != T)
    throw ConfigError("delay vector length does not match the horizon");

  // Counting sort of origins by arrival round; rounds past T never arrive.
  offsets_.assign(static_cast<std::size_t>(T) + 2, 0);
  for (std::int64_t s = 1; s <= T; ++s) {
    const auto d = delays_.realized[static_cast<std::size_t>(s - 1)];
    if (d < 0) throw ConfigError("delays must be nonnegative");
    if (d <= T - s) ++offsets_[static_cast<std::size_t>(s + d) + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  origins_.resize(offsets_.back());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::int64_t s = 1; s <= T; ++s) {
    const auto d = delays_.realized[static_cast<std::size_t>(s - 1)];
    if (d <= T - s) origins_[cursor[static_cast<std::size_t>(s + d)]++] = s;
  }
}

std::span<const std::int64_t> EnvironmentInstance::arrivals_at(std::int64_t t) const {
  if (t < 1 || t > horizon()) return {};
  const auto b = offsets_[static_cast<std::size_t>(t)];
  const auto e = offsets_[static_cast<std::size_t>(t) + 1];
  return std::span<const std::int64_t>(origins_).subspan(b, e - b);
}

EnvironmentInstance build_environment(const EnvironmentConfig& config) {
  validate(config);
  return EnvironmentInstance(build_losses(config), build_delays(config));
}

double loss_at(const EnvironmentInstance& env, std::int64_t t, std::size_t arm, Rng& rng) {
  const auto& m = env.losses();
  if (m.kind == LossKind::adversarial) return m.at(t, arm);
  return uniform01(rng) < m.means[arm] ? 1.0 : 0.0;
}

SigmaSeries ground_truth_sigma(std::span<const std::int64_t> delays) {
  const auto T = static_cast<std::int64_t>(delays.size());
  // Round s is outstanding on [s, s + d_s - 1]; difference array over rounds.
  std::vector<std::int64_t> diff(static_cast<std::size_t>(T) + 2, 0);
  for (std::int64_t s = 1; s <= T; ++s) {
    const auto d = delays[static_cast<std::size_t>(s - 1)];
    if (d <= 0) continue;
    ++diff[static_cast<std::size_t>(s)];
    const std::int64_t end = s + d;  // first round it no longer counts
    if (end <= T) --diff[static_cast<std::size_t>(end)];
  }
  SigmaSeries out;
  out.sigma.resize(static_cast<std::size_t>(T));
  std::int64_t running = 0;
  for (std::int64_t t = 1; t <= T; ++t) {
    running += diff[static_cast<std::size_t>(t)];
    out.sigma[static_cast<std::size_t>(t - 1)] = running;
    out.sigma_max = std::max(out.sigma_max, running);
  }
  return out;
}

SigmaSeries ground_truth_sigma(const EnvironmentInstance& env) { return ground_truth_sigma(env.delays().realized); }

std::vector<std::int64_t> read_delay_file(const std::filesystem::path& path, std::int64_t horizon) {
  const auto lines = read_lines(path);
  check_line_count(path, lines.size(), horizon);
  std::vector<std::int64_t> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto field = trim(lines[i]);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || v < 0)
      throw ConfigError(where(path, i) + ": expected a nonnegative integer delay, got '" + std::string(field) + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<double> read_loss_file(const std::filesystem::path& path, std::int64_t horizon, int num_arms) {
  const auto lines = read_lines(path);
  check_line_count(path, lines.size(), horizon);
  std::vector<double> out;
  out.reserve(lines.size() * static_cast<std::size_t>(num_arms));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view rest = lines[i];
    int fields = 0;
    while (true) {
      const auto comma = rest.find(',');
      const auto field = trim(rest.substr(0, comma));
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size() || !(v >= 0.0 && v <= 1.0))
        throw ConfigError(where(path, i) + ": expected a loss in [0, 1], got '" + std::string(field) + "'");
      out.push_back(v);
      ++fields;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields != num_arms)
      throw ConfigError(where(path, i) + ": expected " + std::to_string(num_arms) + " losses, got " +
                        std::to_string(fields));
  }
  return out;
}

std::string to_string(LossKind kind) { return kind == LossKind::stochastic ? "stochastic" : "adversarial"; }

std::string to_string(DelayKind kind) {
  switch (kind) {
    case DelayKind::constant:
      return "constant";
    case DelayKind::uniform_random:
      return "uniform_random";
    case DelayKind::outlier_front:
      return "outlier_front";
    case DelayKind::single_outlier:
      return "single_outlier";
    case DelayKind::from_file:
      return "from_file";
  }
  return "unknown";
}

std::string to_string(AdversarialGenerator generator) {
  switch (generator) {
    case AdversarialGenerator::zeros:
      return "zeros";
    case AdversarialGenerator::two_phase:
      return "two_phase";
    case AdversarialGenerator::file:
      return "file";
  }
  return "unknown";
}

}  // namespace bobw
