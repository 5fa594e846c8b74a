#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "scm/config.hpp"
#include "scm/sensitivity.hpp"
#include "scm/simulation.hpp"

namespace scm {

inline constexpr std::string_view kVersion = "0.1.0";

// One (attack, contamination) cell of the simulation grid.
struct GridCell {
  std::optional<AttackKind> attack;
  int malicious = 0;
};

// "none" pairs with 0 malicious agents, every attack with every positive count.
std::vector<GridCell> simulation_grid(const ExperimentConfig& cfg);

// Seeds used by repeat r of every cell.
struct RepeatSeeds {
  std::uint64_t repeat = 0;
  std::uint64_t topology = 0;
  std::uint64_t true_model = 0;
  std::uint64_t data = 0;
};

RepeatSeeds repeat_seeds(const ExperimentConfig& cfg, int repeat);

// Per-iteration metrics of every configured aggregator in one cell, averaged
// over repeats. A diverged repeat pins the average to the sentinel.
struct CellResult {
  GridCell cell;
  std::vector<AggregatorKind> aggregators;
  std::vector<std::vector<double>> loss;  // [aggregator][iteration]
  std::vector<std::vector<double>> msd;
  std::vector<double> initial_msd;        // [aggregator]
  std::vector<NetworkTopology> topologies;  // one per repeat
};

CellResult run_cell(const ExperimentConfig& cfg, const GridCell& cell);

// Columns: iteration, then <metric>_<aggregator> in the configured order.
void write_trace_csv(std::ostream& out, const CellResult& result, Metric metric);

// train_loss_edge_07_mal_6_out_max_tukey.csv style names.
std::string trace_file_name(const ExperimentConfig& cfg, const GridCell& cell, Metric metric);

struct CommandOutput {
  std::vector<std::filesystem::path> files;
  std::filesystem::path manifest;
};

// Runs the grid and writes one CSV per (cell, metric), topology edge lists and
// the manifest (written last).
CommandOutput cmd_simulate(const ExperimentConfig& cfg);

// Gaussian base set used by sc-sweep.
std::vector<double> sweep_base(const ExperimentConfig& cfg);

// Analytic attack value for aggregators that have one (trimmed, talwar, tukey).
std::optional<double> analytic_attack_value(const AggregatorSpec& agg, std::span<const double> base, int count,
                                            std::optional<double> epsilon = std::nullopt);

struct ScMarker {
  AggregatorKind aggregator;
  double z_opt = 0.0;
  double sc = 0.0;
};

std::vector<ScMarker> sc_markers(const ExperimentConfig& cfg, std::span<const double> base);

// Writes SC.csv and, when markers are enabled, SC_max.csv ("z_opt,sc,aggregator").
CommandOutput cmd_sc_sweep(const ExperimentConfig& cfg);

struct EfficiencyRow {
  AggregatorKind estimator;
  double variance = 0.0;
  double efficiency = 0.0;  // var(sample mean) / var(estimator)
  double ci_low = 0.0;      // 95% band from batch means
  double ci_high = 0.0;
};

// Monte Carlo efficiency relative to the sample mean on N(0, 1) samples.
// Results do not depend on `threads`.
std::vector<EfficiencyRow> efficiency_check(std::span<const AggregatorSpec> estimators, int trials, int sample_size,
                                            std::uint64_t seed, int threads = 1);

void write_efficiency_csv(std::ostream& out, std::span<const EfficiencyRow> rows);

CommandOutput cmd_efficiency_check(const ExperimentConfig& cfg);

}  // namespace scm
