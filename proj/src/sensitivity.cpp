#include "scm/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace scm {
namespace {

double sc_with_reference(const AggregatorSpec& agg, std::span<const double> base, double reference, double z,
                         int count, std::vector<double>& scratch) {
  scratch.assign(base.begin(), base.end());
  scratch.insert(scratch.end(), static_cast<std::size_t>(count), z);
  const double n = static_cast<double>(scratch.size());
  return n * (estimate(agg, scratch) - reference);
}

void require_query(std::span<const double> base, int count) {
  if (base.empty()) throw std::domain_error("sensitivity curve: empty base set");
  if (count < 1) throw std::domain_error("sensitivity curve: outlier count must be >= 1");
}

}  // namespace

double sensitivity_curve(const AggregatorSpec& agg, std::span<const double> base, double z) {
  return sensitivity_curve_multi(agg, base, z, 1);
}

double sensitivity_curve_multi(const AggregatorSpec& agg, std::span<const double> base, double z, int count) {
  require_query(base, count);
  std::vector<double> scratch;
  return sc_with_reference(agg, base, estimate(agg, base), z, count, scratch);
}

ScTable sc_sweep(std::span<const AggregatorSpec> aggs, std::span<const double> base, std::span<const double> grid,
                 int count) {
  require_query(base, count);
  if (grid.empty()) throw std::domain_error("sc_sweep: empty grid");
  for (std::size_t j = 1; j < grid.size(); ++j) {
    if (!(grid[j] > grid[j - 1])) throw std::domain_error("sc_sweep: grid must be strictly increasing");
  }
  ScTable table;
  table.grid.assign(grid.begin(), grid.end());
  table.aggregators.assign(aggs.begin(), aggs.end());
  std::vector<double> scratch;
  for (const auto& agg : aggs) {
    const double reference = estimate(agg, base);
    std::vector<double> row;
    row.reserve(grid.size());
    for (double z : grid) row.push_back(sc_with_reference(agg, base, reference, z, count, scratch));
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_sc_csv(std::ostream& out, const ScTable& table) {
  out << "z";
  for (const auto& agg : table.aggregators) out << ',' << aggregator_name(agg.kind);
  out << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t j = 0; j < table.grid.size(); ++j) {
    out << table.grid[j];
    for (const auto& row : table.rows) out << ',' << row[j];
    out << '\n';
  }
}

SearchBounds default_search_bounds(std::span<const double> base) {
  const double center = median(base);
  const double half = 10.0 * (mad(base, true) + 1.0);
  return {center - half, center + half};
}

ScMaximum max_sc_numeric(const AggregatorSpec& agg, std::span<const double> base, int count, SearchBounds bounds,
                         int grid_points) {
  require_query(base, count);
  if (!std::isfinite(bounds.lo) || !std::isfinite(bounds.hi) || !(bounds.hi > bounds.lo)) {
    throw std::domain_error("max_sc_numeric: bounds must be finite with lo < hi");
  }
  if (grid_points < 3) throw std::domain_error("max_sc_numeric: need at least 3 grid points");

  const double reference = estimate(agg, base);
  std::vector<double> scratch;
  auto sc = [&](double z) { return sc_with_reference(agg, base, reference, z, count, scratch); };

  const double step = (bounds.hi - bounds.lo) / static_cast<double>(grid_points - 1);
  std::vector<double> zs(static_cast<std::size_t>(grid_points));
  std::vector<double> values(zs.size());
  std::size_t best = 0;
  for (std::size_t j = 0; j < zs.size(); ++j) {
    zs[j] = j + 1 == zs.size() ? bounds.hi : bounds.lo + static_cast<double>(j) * step;
    values[j] = sc(zs[j]);
    if (values[j] > values[best]) best = j;
  }

  // Golden-section search on the cell pair around the best grid point.
  double a = zs[best == 0 ? 0 : best - 1];
  double b = zs[std::min(best + 1, zs.size() - 1)];
  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = sc(x1);
  double f2 = sc(x2);
  for (int it = 0; it < 80 && (b - a) > 1e-12 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = sc(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = sc(x2);
    }
  }
  const double refined_z = f1 >= f2 ? x1 : x2;
  const double refined_sc = std::max(f1, f2);
  zs.push_back(refined_z);
  values.push_back(refined_sc);

  const double top = std::max(values[best], refined_sc);
  const double tol = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(top));
  ScMaximum result{0.0, -std::numeric_limits<double>::infinity()};
  bool found = false;
  for (std::size_t j = 0; j < zs.size(); ++j) {
    if (values[j] < top - tol) continue;
    const double z = zs[j];
    const bool better = !found || std::abs(z) < std::abs(result.z) || (std::abs(z) == std::abs(result.z) && z > result.z);
    if (better) {
      result = {z, values[j]};
      found = true;
    }
  }
  return result;
}

}  // namespace scm
