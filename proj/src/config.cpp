// Flat JSON configuration files for the harness. Every key is optional except
// the ones the chosen loss and delay kinds need; see the README for the full
// reference.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bobw/errors.hpp"
#include "bobw/harness.hpp"
#include "json.hpp"

namespace bobw {

namespace {

using nlohmann::json;

constexpr const char* known_keys[] = {
    "algorithm",   "arms",          "horizon",          "loss",        "means",        "loss_generator",
    "loss_file",   "gap",           "switch_fraction",  "delay",       "delay_value",  "delay_lo",
    "delay_hi",    "outlier_magnitude", "outlier_count", "delay_file", "environment_seed", "seeds",
    "checkpoints", "threshold",     "output",           "allow_equal_means", "parallel", "verify",
    "drift_budget", "diagnostics",  "keep_history",
};

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

void apply_overrides(json& j) {
  for (const char* key : known_keys) {
    const std::string name = env_override_prefix + upper(key);
    const char* raw = std::getenv(name.c_str());
    if (raw == nullptr) continue;
    // Values are JSON when they parse as JSON, plain strings otherwise.
    json value = json::parse(raw, nullptr, false);
    j[key] = value.is_discarded() ? json(std::string(raw)) : value;
  }
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "stochastic") return LossKind::stochastic;
  if (s == "adversarial") return LossKind::adversarial;
  throw ConfigError("loss: expected stochastic or adversarial, got '" + s + "'");
}

AdversarialGenerator parse_generator(const std::string& s) {
  if (s == "zeros") return AdversarialGenerator::zeros;
  if (s == "two_phase") return AdversarialGenerator::two_phase;
  if (s == "file") return AdversarialGenerator::file;
  throw ConfigError("loss_generator: expected zeros, two_phase or file, got '" + s + "'");
}

DelayKind parse_delay_kind(const std::string& s) {
  if (s == "constant") return DelayKind::constant;
  if (s == "uniform_random") return DelayKind::uniform_random;
  if (s == "outlier_front") return DelayKind::outlier_front;
  if (s == "single_outlier") return DelayKind::single_outlier;
  if (s == "from_file") return DelayKind::from_file;
  throw ConfigError("delay: expected constant, uniform_random, outlier_front, single_outlier or from_file, got '" + s + "'");
}

ThresholdRule parse_threshold(const std::string& s) {
  if (s == "standard") return ThresholdRule::standard;
  if (s == "log_k") return ThresholdRule::log_k;
  throw ConfigError("threshold: expected standard or log_k, got '" + s + "'");
}

DiagnosticsFlags parse_diagnostics(const std::string& list) {
  DiagnosticsFlags flags;
  std::istringstream in(list);
  for (std::string item; std::getline(in, item, ',');) {
    if (item == "skips") flags.skips = true;
    else if (item == "drift") flags.drift = true;
    else if (item == "rearrange") flags.rearrange = true;
    else if (item == "lambda") flags.lambda = true;
    else if (!item.empty()) throw ConfigError("diagnostics: unknown check '" + item + "'");
  }
  return flags;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const auto dash = item.find('-');
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } else {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw std::invalid_argument(item);
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("seeds: cannot parse '" + item + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  return seeds;
}

ExperimentConfig parse_config(const std::string& json_text, bool apply_env_overrides) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config: expected a JSON object");
  if (apply_env_overrides) apply_overrides(j);
  for (const auto& item : j.items())
    if (std::find_if(std::begin(known_keys), std::end(known_keys), [&](const char* k) { return item.key() == k; }) ==
        std::end(known_keys))
      throw ConfigError(item.key() + ": unknown key");

  ExperimentConfig c;
  auto& env = c.environment;
  if (j.contains("algorithm")) c.algorithm = parse_algorithm(get<std::string>(j, "algorithm"));
  if (j.contains("arms")) env.num_arms = get<int>(j, "arms");
  if (j.contains("horizon")) env.horizon = get<std::int64_t>(j, "horizon");
  if (j.contains("loss")) env.loss.kind = parse_loss_kind(get<std::string>(j, "loss"));
  if (j.contains("means")) env.loss.means = get<std::vector<double>>(j, "means");
  if (j.contains("loss_generator")) env.loss.generator = parse_generator(get<std::string>(j, "loss_generator"));
  if (j.contains("loss_file")) env.loss.file = get<std::string>(j, "loss_file");
  if (j.contains("gap")) env.loss.gap = get<double>(j, "gap");
  if (j.contains("switch_fraction")) env.loss.switch_fraction = get<double>(j, "switch_fraction");
  if (j.contains("allow_equal_means")) env.loss.allow_equal_means = get<bool>(j, "allow_equal_means");
  if (j.contains("delay")) env.delay.kind = parse_delay_kind(get<std::string>(j, "delay"));
  if (j.contains("delay_value")) env.delay.value = get<std::int64_t>(j, "delay_value");
  if (j.contains("delay_lo")) env.delay.lo = get<std::int64_t>(j, "delay_lo");
  if (j.contains("delay_hi")) env.delay.hi = get<std::int64_t>(j, "delay_hi");
  if (j.contains("outlier_magnitude")) env.delay.magnitude = get<std::int64_t>(j, "outlier_magnitude");
  if (j.contains("outlier_count")) env.delay.count = get<std::int64_t>(j, "outlier_count");
  if (j.contains("delay_file")) env.delay.file = get<std::string>(j, "delay_file");
  if (j.contains("environment_seed")) env.seed = get<std::uint64_t>(j, "environment_seed");
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    c.seeds = s.is_string() ? parse_seed_list(s.get<std::string>()) : get<std::vector<std::uint64_t>>(j, "seeds");
  }
  if (j.contains("checkpoints")) c.checkpoints = get<std::vector<std::int64_t>>(j, "checkpoints");
  if (j.contains("threshold")) c.threshold = parse_threshold(get<std::string>(j, "threshold"));
  if (j.contains("output")) c.output = get<std::string>(j, "output");
  if (j.contains("parallel")) c.parallel = get<int>(j, "parallel");
  if (j.contains("verify")) c.verify = get<bool>(j, "verify");
  if (j.contains("keep_history")) c.keep_history = get<bool>(j, "keep_history");
  if (j.contains("diagnostics")) c.diagnostics = parse_diagnostics(get<std::string>(j, "diagnostics"));
  if (j.contains("drift_budget")) c.diagnostics.drift_budget = get<std::int64_t>(j, "drift_budget");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  auto config = parse_config(buf.str());
  // Relative data files are resolved against the config file's directory.
  const auto base = path.parent_path();
  auto resolve = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  resolve(config.environment.loss.file);
  resolve(config.environment.delay.file);
  return config;
}

}  // namespace bobw
