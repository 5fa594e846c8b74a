#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scm/attacks.hpp"
#include "scm/estimators.hpp"

namespace scm {

enum class Metric { kLoss, kMsd };

std::string_view metric_name(Metric metric);

// Parse or validation failure. `line` is 0 when the problem is not tied to a
// single line (cross-key constraints).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, std::string key, const std::string& message);

  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  int line_;
  std::string key_;
};

// Every tunable of the three subcommands. Field defaults are the resolved
// defaults; an unset optional seed is derived from run.seed.
struct ExperimentConfig {
  // [run]
  std::uint64_t seed = 1;
  int repeats = 1;
  int threads = 1;

  // [topology]
  int agents = 32;
  double edge_probability = 0.7;
  std::vector<int> malicious = {0};
  std::optional<std::uint64_t> topology_seed;

  // [model]
  int dim = 10;
  double noise_var = 0.01;
  std::optional<std::uint64_t> w_seed;

  // [learning]
  double step_size = 0.05;
  int iterations = 300;
  double huber_delta = 1.0;
  int batch_size = 1;

  // [aggregators]
  std::vector<AggregatorKind> aggregators = {AggregatorKind::kSampleMean, AggregatorKind::kAlphaTrimmedMean,
                                             AggregatorKind::kTalwar, AggregatorKind::kBiweightTukey,
                                             AggregatorKind::kMedian};
  double alpha = kTrimAlpha95;
  double talwar_c = kTalwarC95;
  double tukey_c = kTukeyC95;
  double tol = 1e-9;
  int max_iter = 100;

  // [attack]; nullopt stands for "none".
  std::vector<std::optional<AttackKind>> attacks = {std::nullopt};
  double lv_magnitude = kDefaultLargeValue;
  std::optional<double> epsilon;

  // [output]
  std::string dir = "out";
  std::vector<Metric> metrics = {Metric::kLoss, Metric::kMsd};

  // [sweep]
  std::vector<AggregatorKind> sweep_aggregators = {AggregatorKind::kSampleMean, AggregatorKind::kMedian,
                                                   AggregatorKind::kBiweightTukey, AggregatorKind::kAlphaTrimmedMean,
                                                   AggregatorKind::kTalwar};
  int base_size = 100;
  std::optional<std::uint64_t> base_seed;
  double z_min = -10.0;
  double z_max = 10.0;
  int grid_points = 401;
  int outlier_count = 1;
  bool markers = true;

  // [efficiency]
  std::vector<AggregatorKind> efficiency_estimators = {AggregatorKind::kSampleMean, AggregatorKind::kMedian,
                                                       AggregatorKind::kAlphaTrimmedMean, AggregatorKind::kTalwar,
                                                       AggregatorKind::kBiweightTukey};
  int trials = 100000;
  int sample_size = 100;

  bool operator==(const ExperimentConfig&) const = default;
};

// Sectioned key = value text. '#' starts a comment. Unknown sections or keys,
// duplicate keys and malformed values throw ConfigError with the line number;
// the result is validated.
ExperimentConfig parse_config(std::string_view text);

// Throws ConfigError naming the violated constraint.
void validate(const ExperimentConfig& cfg);

// Resolved config with every key written out; parse_config(to_text(c)) == c.
std::string to_text(const ExperimentConfig& cfg);

// Specs carrying the config's tuning.
AggregatorSpec make_aggregator(const ExperimentConfig& cfg, AggregatorKind kind);
AttackSpec make_attack(const ExperimentConfig& cfg, AttackKind kind);

}  // namespace scm
