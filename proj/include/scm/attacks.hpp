#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "scm/estimators.hpp"

namespace scm {

enum class AttackKind { kLargeValue, kAlphaScm, kTalwarScm, kTukeyScm };

inline constexpr double kDefaultLargeValue = 1e3;

// Attack scheme and its parameters. The target tuning must match the
// aggregator under attack. An unset epsilon means 1e-6 * (1 + spread of the
// benign values) per coordinate.
struct AttackSpec {
  AttackKind kind = AttackKind::kLargeValue;
  double lv_magnitude = kDefaultLargeValue;
  double target_alpha = kTrimAlpha95;
  double target_c = kTukeyC95;
  std::optional<double> epsilon = std::nullopt;

  static AttackSpec large_value(double magnitude = kDefaultLargeValue);
  static AttackSpec alpha_scm(double alpha = kTrimAlpha95);
  static AttackSpec talwar_scm(double c = kTalwarC95);
  static AttackSpec tukey_scm(double c = kTukeyC95);

  void validate() const;

  bool operator==(const AttackSpec&) const = default;
};

// Short machine name: lv, alpha_scm, talwar_scm, tukey_scm.
std::string_view attack_name(AttackKind kind);
AttackKind parse_attack_kind(std::string_view name);
// Name used in trace file names: large_value, max_alpha_mean, max_talwar_mean, max_tukey.
std::string_view attack_file_tag(AttackKind kind);

// What the attacker sees when crafting for one receiving agent.
struct CraftingContext {
  std::vector<std::vector<double>> benign_values_per_dim;  // Y_m, one entry per benign neighbor
  int malicious_count = 0;                                 // P

  // Transposes the benign neighbors' vectors into per-coordinate sample sets.
  static CraftingContext from_vectors(std::span<const WeightVector> benign, int malicious_count);

  std::size_t dim() const { return benign_values_per_dim.size(); }
  void validate() const;
};

// Location of the psi maximum: c (Talwar) or c / sqrt(5) (biweight Tukey).
double psi_argmax(AggregatorKind kind, double c);

struct MEstimatorScm {
  double z_init = 0.0;
  double z_opt = 0.0;
};

// Two-stage M-estimator attack value for one coordinate: place the outlier at
// the psi maximum relative to the benign median and normalized MAD, then
// re-place it relative to the median and MAD of the benign set plus P copies of
// that first value. Zero benign MAD returns the benign median for both stages.
MEstimatorScm mestimator_scm(std::span<const double> benign, int malicious_count, AggregatorKind target, double c);

// One shift-correction step: c0 * MAD(Y u {z x P}) + median(Y u {z x P}).
// z_opt is a fixed point of this map.
double shift_correct(std::span<const double> benign, int malicious_count, double z, double c0);

// Alpha-trimmed attack value for one coordinate: the largest benign value that
// survives top trimming with N_k = |Y| + P, minus epsilon. Every malicious copy
// then survives the trim.
double alpha_scm_value(std::span<const double> benign, int malicious_count, double alpha, double epsilon);

// Default epsilon for a coordinate: 1e-6 * (1 + max(Y) - min(Y)).
double default_epsilon(std::span<const double> benign);

std::vector<double> craft_lv(const CraftingContext& ctx, const AttackSpec& spec);
std::vector<double> craft_alpha_scm(const CraftingContext& ctx, const AttackSpec& spec);
std::vector<double> craft_mestimator_scm(const CraftingContext& ctx, const AttackSpec& spec);

// Dispatches on spec.kind. Every malicious neighbor of the receiver sends the
// returned vector to that receiver.
WeightVector craft_attack(const CraftingContext& ctx, const AttackSpec& spec);

}  // namespace scm
