#include "scm/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace scm {
namespace {

void require_sample(std::span<const double> s, const char* who) {
  if (s.empty()) throw std::domain_error(std::string(who) + ": empty sample set");
  for (double v : s) {
    if (!std::isfinite(v)) throw std::domain_error(std::string(who) + ": non-finite sample");
  }
}

// Median of a scratch buffer; reorders it.
double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  const auto mid_it = v.begin() + static_cast<std::ptrdiff_t>(mid);
  std::nth_element(v.begin(), mid_it, v.end());
  double med = *mid_it;
  if (n % 2 == 0) {
    const double lower = *std::max_element(v.begin(), mid_it);
    med = 0.5 * (lower + med);
  }
  return med;
}

// Biweight and hard-rejection weights w(r) = psi(r) / r, with w(0) = 1.
double psi_weight(AggregatorKind kind, double r, double c) {
  if (std::abs(r) > c) return 0.0;
  if (kind == AggregatorKind::kTalwar) return 1.0;
  const double u = r / c;
  const double t = 1.0 - u * u;
  return t * t;
}

}  // namespace

AggregatorSpec AggregatorSpec::sample_mean() { return {AggregatorKind::kSampleMean}; }
AggregatorSpec AggregatorSpec::median() { return {AggregatorKind::kMedian}; }

AggregatorSpec AggregatorSpec::trimmed_mean(double alpha) {
  AggregatorSpec spec{AggregatorKind::kAlphaTrimmedMean};
  spec.alpha = alpha;
  return spec;
}

AggregatorSpec AggregatorSpec::talwar(double c) {
  AggregatorSpec spec{AggregatorKind::kTalwar};
  spec.c = c;
  return spec;
}

AggregatorSpec AggregatorSpec::tukey(double c) {
  AggregatorSpec spec{AggregatorKind::kBiweightTukey};
  spec.c = c;
  return spec;
}

void AggregatorSpec::validate() const {
  if (!(alpha >= 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in [0, 0.5)");
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("tuning constant c must be positive");
  if (!(fixed_point_tol > 0.0)) throw std::invalid_argument("fixed_point_tol must be positive");
  if (fixed_point_max_iter < 1) throw std::invalid_argument("fixed_point_max_iter must be >= 1");
}

std::string_view aggregator_name(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::kSampleMean: return "mean";
    case AggregatorKind::kMedian: return "median";
    case AggregatorKind::kAlphaTrimmedMean: return "trimmed";
    case AggregatorKind::kTalwar: return "talwar";
    case AggregatorKind::kBiweightTukey: return "tukey";
  }
  return "unknown";
}

AggregatorKind parse_aggregator_kind(std::string_view name) {
  for (auto kind : {AggregatorKind::kSampleMean, AggregatorKind::kMedian, AggregatorKind::kAlphaTrimmedMean,
                    AggregatorKind::kTalwar, AggregatorKind::kBiweightTukey}) {
    if (aggregator_name(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown aggregator '" + std::string(name) + "'");
}

std::vector<AggregatorSpec> tuned_aggregators() {
  return {AggregatorSpec::sample_mean(), AggregatorSpec::trimmed_mean(), AggregatorSpec::talwar(),
          AggregatorSpec::tukey(), AggregatorSpec::median()};
}

double sample_mean(std::span<const double> s) {
  require_sample(s, "sample_mean");
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

double median(std::span<const double> s) {
  require_sample(s, "median");
  std::vector<double> scratch(s.begin(), s.end());
  return median_inplace(scratch);
}

double mad(std::span<const double> s, bool normalized) {
  require_sample(s, "mad");
  std::vector<double> scratch(s.begin(), s.end());
  const double center = median_inplace(scratch);
  for (std::size_t i = 0; i < s.size(); ++i) scratch[i] = std::abs(s[i] - center);
  const double raw = median_inplace(scratch);
  return normalized ? kMadConsistency * raw : raw;
}

std::size_t trim_count(double alpha, std::size_t n) {
  // The small offset keeps products such as 0.2 * 5 from flooring to 0.
  return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) + 1e-9));
}

double alpha_trimmed_mean(std::span<const double> s, double alpha) {
  require_sample(s, "alpha_trimmed_mean");
  if (!(alpha >= 0.0 && alpha < 0.5)) throw std::domain_error("alpha_trimmed_mean: alpha outside [0, 0.5)");
  const std::size_t n = s.size();
  const std::size_t t = trim_count(alpha, n);
  if (2 * t >= n) throw std::domain_error("alpha_trimmed_mean: trimming removes every sample");
  std::vector<double> sorted(s.begin(), s.end());
  std::sort(sorted.begin(), sorted.end());
  const auto first = sorted.begin() + static_cast<std::ptrdiff_t>(t);
  const auto last = sorted.end() - static_cast<std::ptrdiff_t>(t);
  return std::accumulate(first, last, 0.0) / static_cast<double>(n - 2 * t);
}

double psi(AggregatorKind kind, double x, double c) {
  if (kind != AggregatorKind::kTalwar && kind != AggregatorKind::kBiweightTukey) {
    throw std::invalid_argument("psi: only defined for Talwar and biweight Tukey");
  }
  return x * psi_weight(kind, x, c);
}

MEstimate m_estimate(std::span<const double> s, const AggregatorSpec& spec) {
  require_sample(s, "m_estimate");
  if (spec.kind != AggregatorKind::kTalwar && spec.kind != AggregatorKind::kBiweightTukey) {
    throw std::invalid_argument("m_estimate: aggregator is not an M-estimator");
  }
  const double start = median(s);
  const double scale = mad(s, /*normalized=*/true);
  if (scale == 0.0) return {start, true, 0};

  const double n = static_cast<double>(s.size());
  double mu = start;
  for (int it = 0; it < spec.fixed_point_max_iter; ++it) {
    double sum_psi = 0.0;
    double sum_w = 0.0;
    for (double y : s) {
      const double r = (y - mu) / scale;
      const double w = psi_weight(spec.kind, r, spec.c);
      sum_psi += w * r;
      sum_w += w;
    }
    if (std::abs(sum_psi) <= n * spec.fixed_point_tol) return {mu, true, it};
    if (sum_w <= 0.0) return {mu, false, it};
    mu += scale * sum_psi / sum_w;
  }
  return {mu, false, spec.fixed_point_max_iter};
}

double estimate(const AggregatorSpec& spec, std::span<const double> s) {
  switch (spec.kind) {
    case AggregatorKind::kSampleMean: return sample_mean(s);
    case AggregatorKind::kMedian: return median(s);
    case AggregatorKind::kAlphaTrimmedMean: return alpha_trimmed_mean(s, spec.alpha);
    case AggregatorKind::kTalwar:
    case AggregatorKind::kBiweightTukey: return m_estimate(s, spec).location;
  }
  throw std::invalid_argument("estimate: unknown aggregator");
}

WeightVector aggregate(const AggregatorSpec& spec, std::span<const WeightVector> vectors, AggregateStats* stats) {
  if (vectors.empty()) throw std::domain_error("aggregate: no vectors");
  const std::size_t dim = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw std::domain_error("aggregate: dimension mismatch");
  }
  const bool is_m = spec.kind == AggregatorKind::kTalwar || spec.kind == AggregatorKind::kBiweightTukey;
  WeightVector out(dim);
  std::vector<double> column(vectors.size());
  for (std::size_t m = 0; m < dim; ++m) {
    for (std::size_t l = 0; l < vectors.size(); ++l) column[l] = vectors[l][m];
    if (is_m) {
      const MEstimate est = m_estimate(column, spec);
      out[m] = est.location;
      if (stats && !est.converged) ++stats->nonconverged_coordinates;
    } else {
      out[m] = estimate(spec, column);
    }
  }
  return out;
}

}  // namespace scm
