#pragma once

#include <ostream>
#include <span>
#include <vector>

#include "scm/estimators.hpp"

namespace scm {

// SC(Y, z) = N * (AGG(Y u {z}) - AGG(Y)) with N = |Y| + 1.
double sensitivity_curve(const AggregatorSpec& agg, std::span<const double> base, double z);

// Same with `count` identical copies of z; N = |Y| + count.
double sensitivity_curve_multi(const AggregatorSpec& agg, std::span<const double> base, double z, int count);

struct ScTable {
  std::vector<double> grid;
  std::vector<AggregatorSpec> aggregators;
  std::vector<std::vector<double>> rows;  // rows[i][j]: aggregator i at grid[j]
};

ScTable sc_sweep(std::span<const AggregatorSpec> aggs, std::span<const double> base, std::span<const double> grid,
                 int count);

// CSV: header "z,<name>...", then one line per grid value.
void write_sc_csv(std::ostream& out, const ScTable& table);

struct SearchBounds {
  double lo = 0.0;
  double hi = 0.0;
};

// median(base) +/- 10 * (normalized MAD + 1).
SearchBounds default_search_bounds(std::span<const double> base);

struct ScMaximum {
  double z = 0.0;
  double sc = 0.0;
};

inline constexpr int kDefaultScGridPoints = 4001;

// Derivative-free maximization of the signed SC over `bounds`: dense grid, then
// golden-section refinement around the best grid cell. Among candidates equal
// to the maximum up to 64 ulp the smallest |z| wins, +z on a mirrored tie.
ScMaximum max_sc_numeric(const AggregatorSpec& agg, std::span<const double> base, int count, SearchBounds bounds,
                         int grid_points = kDefaultScGridPoints);

}  // namespace scm
