#include "scm/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace scm {
namespace {

// Talwar's psi drops to zero just past c, so a value placed exactly on the
// boundary can be rejected by one ulp of rounding in (z - median) / scale.
constexpr double kTalwarBoundaryMargin = 1e-9;

AggregatorKind target_kind(AttackKind kind) {
  switch (kind) {
    case AttackKind::kTalwarScm: return AggregatorKind::kTalwar;
    case AttackKind::kTukeyScm: return AggregatorKind::kBiweightTukey;
    case AttackKind::kAlphaScm: return AggregatorKind::kAlphaTrimmedMean;
    case AttackKind::kLargeValue: return AggregatorKind::kSampleMean;
  }
  return AggregatorKind::kSampleMean;
}

std::vector<double> with_copies(std::span<const double> benign, int count, double z) {
  std::vector<double> joined(benign.begin(), benign.end());
  joined.insert(joined.end(), static_cast<std::size_t>(count), z);
  return joined;
}

}  // namespace

AttackSpec AttackSpec::large_value(double magnitude) {
  AttackSpec spec{AttackKind::kLargeValue};
  spec.lv_magnitude = magnitude;
  return spec;
}

AttackSpec AttackSpec::alpha_scm(double alpha) {
  AttackSpec spec{AttackKind::kAlphaScm};
  spec.target_alpha = alpha;
  return spec;
}

AttackSpec AttackSpec::talwar_scm(double c) {
  AttackSpec spec{AttackKind::kTalwarScm};
  spec.target_c = c;
  return spec;
}

AttackSpec AttackSpec::tukey_scm(double c) {
  AttackSpec spec{AttackKind::kTukeyScm};
  spec.target_c = c;
  return spec;
}

void AttackSpec::validate() const {
  if (!std::isfinite(lv_magnitude)) throw std::invalid_argument("lv_magnitude must be finite");
  if (epsilon && !(*epsilon > 0.0 && std::isfinite(*epsilon))) throw std::invalid_argument("epsilon must be positive");
  if (!(target_alpha >= 0.0 && target_alpha < 0.5)) throw std::invalid_argument("target_alpha must lie in [0, 0.5)");
  if (!(target_c > 0.0 && std::isfinite(target_c))) throw std::invalid_argument("target_c must be positive");
}

std::string_view attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kLargeValue: return "lv";
    case AttackKind::kAlphaScm: return "alpha_scm";
    case AttackKind::kTalwarScm: return "talwar_scm";
    case AttackKind::kTukeyScm: return "tukey_scm";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view name) {
  for (auto kind : {AttackKind::kLargeValue, AttackKind::kAlphaScm, AttackKind::kTalwarScm, AttackKind::kTukeyScm}) {
    if (attack_name(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown attack '" + std::string(name) + "'");
}

std::string_view attack_file_tag(AttackKind kind) {
  switch (kind) {
    case AttackKind::kLargeValue: return "large_value";
    case AttackKind::kAlphaScm: return "max_alpha_mean";
    case AttackKind::kTalwarScm: return "max_talwar_mean";
    case AttackKind::kTukeyScm: return "max_tukey";
  }
  return "unknown";
}

CraftingContext CraftingContext::from_vectors(std::span<const WeightVector> benign, int malicious_count) {
  if (benign.empty()) throw std::domain_error("crafting context: no benign neighbors");
  CraftingContext ctx;
  ctx.malicious_count = malicious_count;
  const std::size_t dim = benign.front().size();
  ctx.benign_values_per_dim.assign(dim, std::vector<double>(benign.size()));
  for (std::size_t l = 0; l < benign.size(); ++l) {
    if (benign[l].size() != dim) throw std::domain_error("crafting context: dimension mismatch");
    for (std::size_t m = 0; m < dim; ++m) ctx.benign_values_per_dim[m][l] = benign[l][m];
  }
  return ctx;
}

void CraftingContext::validate() const {
  if (malicious_count < 1) throw std::domain_error("crafting context: no malicious neighbors");
  for (const auto& ys : benign_values_per_dim) {
    if (ys.empty()) throw std::domain_error("crafting context: empty benign set");
  }
}

double psi_argmax(AggregatorKind kind, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("psi_argmax: c must be positive");
  switch (kind) {
    case AggregatorKind::kTalwar: return c;
    case AggregatorKind::kBiweightTukey: return c / std::sqrt(5.0);
    default: throw std::invalid_argument("psi_argmax: only defined for Talwar and biweight Tukey");
  }
}

double shift_correct(std::span<const double> benign, int malicious_count, double z, double c0) {
  const auto joined = with_copies(benign, malicious_count, z);
  return c0 * mad(joined, true) + median(joined);
}

MEstimatorScm mestimator_scm(std::span<const double> benign, int malicious_count, AggregatorKind target, double c) {
  if (malicious_count < 0) throw std::domain_error("mestimator_scm: negative malicious count");
  double c0 = psi_argmax(target, c);
  if (target == AggregatorKind::kTalwar) c0 *= 1.0 - kTalwarBoundaryMargin;
  const double center = median(benign);
  const double scale = mad(benign, true);
  if (scale == 0.0) return {center, center};
  const double z_init = c0 * scale + center;
  if (malicious_count == 0) return {z_init, z_init};
  return {z_init, shift_correct(benign, malicious_count, z_init, c0)};
}

double default_epsilon(std::span<const double> benign) {
  const auto [lo, hi] = std::minmax_element(benign.begin(), benign.end());
  return 1e-6 * (1.0 + (*hi - *lo));
}

double alpha_scm_value(std::span<const double> benign, int malicious_count, double alpha, double epsilon) {
  if (benign.empty()) throw std::domain_error("alpha_scm_value: empty benign set");
  if (malicious_count < 1) throw std::domain_error("alpha_scm_value: no malicious copies to place");
  const std::size_t n_benign = benign.size();
  const std::size_t n_total = n_benign + static_cast<std::size_t>(malicious_count);
  const std::size_t t = trim_count(alpha, n_total);
  if (2 * t >= n_total || t >= n_benign) throw std::domain_error("alpha_scm_value: trimming removes everything");
  std::vector<double> sorted(benign.begin(), benign.end());
  std::sort(sorted.begin(), sorted.end());
  // The t largest benign values fill the top trim; the next one down is the
  // highest rank a malicious copy can hold without being trimmed.
  const std::size_t boundary = n_benign - std::max<std::size_t>(t, 1);
  return sorted[boundary] - epsilon;
}

std::vector<double> craft_lv(const CraftingContext& ctx, const AttackSpec& spec) {
  if (spec.kind != AttackKind::kLargeValue) throw std::invalid_argument("craft_lv: wrong attack kind");
  return std::vector<double>(ctx.dim(), spec.lv_magnitude);
}

std::vector<double> craft_alpha_scm(const CraftingContext& ctx, const AttackSpec& spec) {
  if (spec.kind != AttackKind::kAlphaScm) throw std::invalid_argument("craft_alpha_scm: wrong attack kind");
  ctx.validate();
  std::vector<double> out;
  out.reserve(ctx.dim());
  for (const auto& ys : ctx.benign_values_per_dim) {
    const double eps = spec.epsilon.value_or(default_epsilon(ys));
    out.push_back(alpha_scm_value(ys, ctx.malicious_count, spec.target_alpha, eps));
  }
  return out;
}

std::vector<double> craft_mestimator_scm(const CraftingContext& ctx, const AttackSpec& spec) {
  if (spec.kind != AttackKind::kTalwarScm && spec.kind != AttackKind::kTukeyScm) {
    throw std::invalid_argument("craft_mestimator_scm: wrong attack kind");
  }
  ctx.validate();
  std::vector<double> out;
  out.reserve(ctx.dim());
  for (const auto& ys : ctx.benign_values_per_dim) {
    out.push_back(mestimator_scm(ys, ctx.malicious_count, target_kind(spec.kind), spec.target_c).z_opt);
  }
  return out;
}

WeightVector craft_attack(const CraftingContext& ctx, const AttackSpec& spec) {
  switch (spec.kind) {
    case AttackKind::kLargeValue: return craft_lv(ctx, spec);
    case AttackKind::kAlphaScm: return craft_alpha_scm(ctx, spec);
    case AttackKind::kTalwarScm:
    case AttackKind::kTukeyScm: return craft_mestimator_scm(ctx, spec);
  }
  throw std::invalid_argument("craft_attack: unknown attack kind");
}

}  // namespace scm
