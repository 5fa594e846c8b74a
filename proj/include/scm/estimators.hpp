#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace scm {

using WeightVector = std::vector<double>;

enum class AggregatorKind { kSampleMean, kMedian, kAlphaTrimmedMean, kTalwar, kBiweightTukey };

// Tuning constants giving 95% Gaussian efficiency.
inline constexpr double kTrimAlpha95 = 0.0688;
inline constexpr double kTalwarC95 = 2.7955;
inline constexpr double kTukeyC95 = 4.685;

// Scale factor making the MAD consistent for the Gaussian standard deviation.
inline constexpr double kMadConsistency = 1.4826;

// Aggregation rule plus its tuning. `alpha` is read only by the trimmed mean,
// `c` only by the two M-estimators.
struct AggregatorSpec {
  AggregatorKind kind = AggregatorKind::kSampleMean;
  double alpha = kTrimAlpha95;
  double c = kTukeyC95;
  double fixed_point_tol = 1e-9;
  int fixed_point_max_iter = 100;

  static AggregatorSpec sample_mean();
  static AggregatorSpec median();
  static AggregatorSpec trimmed_mean(double alpha = kTrimAlpha95);
  static AggregatorSpec talwar(double c = kTalwarC95);
  static AggregatorSpec tukey(double c = kTukeyC95);

  // Throws std::invalid_argument on a violated invariant.
  void validate() const;

  bool operator==(const AggregatorSpec&) const = default;
};

// Short machine name: mean, median, trimmed, talwar, tukey.
std::string_view aggregator_name(AggregatorKind kind);
// Inverse of aggregator_name; throws std::invalid_argument.
AggregatorKind parse_aggregator_kind(std::string_view name);

// The five rules with their 95%-efficiency tuning, in the trace column order
// (mean, trimmed, talwar, tukey, median).
std::vector<AggregatorSpec> tuned_aggregators();

// All scalar estimators throw std::domain_error on an empty or non-finite sample.
double sample_mean(std::span<const double> s);
double median(std::span<const double> s);
double mad(std::span<const double> s, bool normalized);

// Number of samples removed from each side: floor(alpha * n).
std::size_t trim_count(double alpha, std::size_t n);
double alpha_trimmed_mean(std::span<const double> s, double alpha);

// Talwar (hard rejection) or biweight Tukey psi. Total function for c > 0.
double psi(AggregatorKind kind, double x, double c);

struct MEstimate {
  double location = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Location M-estimate with the scale fixed at the normalized MAD and the
// iteration started at the median. Zero scale returns the median.
MEstimate m_estimate(std::span<const double> s, const AggregatorSpec& spec);

// Scalar dispatch over all five rules.
double estimate(const AggregatorSpec& spec, std::span<const double> s);

struct AggregateStats {
  std::size_t nonconverged_coordinates = 0;
};

// Element-wise aggregation of equally sized vectors.
WeightVector aggregate(const AggregatorSpec& spec, std::span<const WeightVector> vectors,
                       AggregateStats* stats = nullptr);

}  // namespace scm
