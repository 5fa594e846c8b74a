// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   acceptance            all criteria
//   acceptance 3 7        only the listed ones

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "scm/attacks.hpp"
#include "scm/commands.hpp"
#include "scm/sensitivity.hpp"
#include "scm/simulation.hpp"

using namespace scm;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "!") + what;
  }
};

std::string num(double x, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, x);
  return buf;
}

int worker_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Mean over the last 50 iterations of a trace.
double final_value(const std::vector<double>& series) {
  const std::size_t n = std::min<std::size_t>(50, series.size());
  double sum = 0.0;
  for (std::size_t i = series.size() - n; i < series.size(); ++i) sum += series[i];
  return sum / static_cast<double>(n);
}

std::size_t column_of(const CellResult& r, AggregatorKind kind) {
  return static_cast<std::size_t>(std::find(r.aggregators.begin(), r.aggregators.end(), kind) - r.aggregators.begin());
}

// Defaults of the learning experiment (K=32, p=0.7) averaged over five seeds.
ExperimentConfig experiment_config() {
  ExperimentConfig cfg;
  cfg.seed = 1;
  cfg.repeats = 5;
  cfg.threads = worker_threads();
  return cfg;
}

Verdict efficiency_calibration() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const auto specs = tuned_aggregators();
  const auto rows = efficiency_check(specs, 100000, 100, 1, worker_threads());
  for (const auto& r : rows) {
    if (r.estimator == AggregatorKind::kSampleMean) continue;
    const bool median = r.estimator == AggregatorKind::kMedian;
    const double lo = median ? 0.60 : 0.90, hi = median ? 0.70 : 1.00;
    v.require(r.efficiency >= lo && r.efficiency <= hi,
              std::string(aggregator_name(r.estimator)) + " " + num(r.efficiency) + " in [" + num(lo) + "," + num(hi) + "]");
  }
  const double secs = seconds_since(t0);
  v.require(secs < 60.0, "runtime " + num(secs, 3) + "s < 60s");
  return v;
}

Verdict sc_shape() {
  Verdict v;
  const ExperimentConfig cfg;  // default sweep: 100 Gaussian draws, 401 points over [-10, 10]
  const auto base = sweep_base(cfg);
  std::vector<double> grid(static_cast<std::size_t>(cfg.grid_points));
  for (std::size_t j = 0; j < grid.size(); ++j) {
    grid[j] = cfg.z_min + (cfg.z_max - cfg.z_min) * static_cast<double>(j) / static_cast<double>(grid.size() - 1);
  }

  // mean row is affine: least-squares line, max residual
  const std::vector<AggregatorSpec> mean_only{AggregatorSpec::sample_mean()};
  const auto row = sc_sweep(mean_only, base, grid, 1).rows[0];
  const double n = static_cast<double>(grid.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    sx += grid[j];
    sy += row[j];
    sxx += grid[j] * grid[j];
    sxy += grid[j] * row[j];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / n;
  double dev = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) dev = std::max(dev, std::abs(row[j] - (slope * grid[j] + icpt)));
  v.require(dev < 1e-9, "mean linear-fit deviation " + num(dev) + " < 1e-9");

  const auto med = AggregatorSpec::median();
  const double m3 = sensitivity_curve(med, base, 1e3), m6 = sensitivity_curve(med, base, 1e6);
  v.require(m3 == m6, "median SC(1e3) " + num(m3, 17) + " == SC(1e6) " + num(m6, 17));

  for (const auto& agg : {AggregatorSpec::talwar(), AggregatorSpec::tukey()}) {
    const double far = sensitivity_curve(agg, base, 1e6);
    v.require(std::abs(far) <= 1e-6, std::string(aggregator_name(agg.kind)) + " |SC(1e6)| " + num(std::abs(far)) + " <= 1e-6");
  }

  for (const auto& m : sc_markers(cfg, base)) {
    const auto agg = make_aggregator(cfg, m.aggregator);
    const auto top = max_sc_numeric(agg, base, cfg.outlier_count, default_search_bounds(base));
    v.require(m.sc >= 0.95 * top.sc, std::string(aggregator_name(m.aggregator)) + " marker SC " + num(m.sc) +
                                         " >= 0.95 x " + num(top.sc));
  }
  return v;
}

Verdict attack_near_optimality() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> normal;
  int shortfall[2] = {0, 0};
  double worst[2] = {1e300, 1e300};
  int moved = 0;
  double worst_move = 0.0;
  const int sets = 200;
  for (int s = 0; s < sets; ++s) {
    const int n = std::uniform_int_distribution<int>(5, 50)(rng);
    const int p = std::uniform_int_distribution<int>(1, n / 3)(rng);
    std::vector<double> y(static_cast<std::size_t>(n));
    for (auto& x : y) x = normal(rng);
    const auto bounds = default_search_bounds(y);
    int i = 0;
    for (const auto& agg : {AggregatorSpec::talwar(), AggregatorSpec::tukey()}) {
      const auto r = mestimator_scm(y, p, agg.kind, agg.c);
      const double sc = sensitivity_curve_multi(agg, y, r.z_opt, p);
      const double top = max_sc_numeric(agg, y, p, bounds).sc;
      const double ratio = top > 0.0 ? sc / top : 1.0;
      worst[i] = std::min(worst[i], ratio);
      if (sc < 0.95 * top) ++shortfall[i];

      double c0 = psi_argmax(agg.kind, agg.c);
      if (agg.kind == AggregatorKind::kTalwar) c0 *= 1.0 - 1e-9;
      const double again = shift_correct(y, p, r.z_opt, c0);
      const double rel = std::abs(again - r.z_opt) / std::max(1.0, std::abs(r.z_opt));
      worst_move = std::max(worst_move, rel);
      if (rel > 1e-9) ++moved;
      ++i;
    }
  }
  v.require(shortfall[0] == 0, "talwar below 95% on " + std::to_string(shortfall[0]) + "/" + std::to_string(sets) +
                                   " (worst ratio " + num(worst[0], 3) + ")");
  v.require(shortfall[1] == 0, "tukey below 95% on " + std::to_string(shortfall[1]) + "/" + std::to_string(sets) +
                                   " (worst ratio " + num(worst[1], 3) + ")");
  v.require(moved == 0, "second shift correction moved z beyond 1e-9 on " + std::to_string(moved) + "/" +
                            std::to_string(2 * sets) + " (worst " + num(worst_move, 3) + ")");
  const double secs = seconds_since(t0);
  v.require(secs < 60.0, "runtime " + num(secs, 3) + "s < 60s");
  return v;
}

Verdict no_attack_baseline(const CellResult& clean, double secs) {
  Verdict v;
  double lowest = 1e300, highest = -1e300;
  AggregatorKind low_kind{}, high_kind{};
  for (std::size_t a = 0; a < clean.aggregators.size(); ++a) {
    const auto name = std::string(aggregator_name(clean.aggregators[a]));
    const double msd = final_value(clean.msd[a]);
    v.require(msd < 1e-2 * clean.initial_msd[a], name + " MSD " + num(msd) + " < 1e-2 x " + num(clean.initial_msd[a]));
    const double loss = final_value(clean.loss[a]);
    if (loss < lowest) lowest = loss, low_kind = clean.aggregators[a];
    if (loss > highest) highest = loss, high_kind = clean.aggregators[a];
  }
  v.require(low_kind == AggregatorKind::kSampleMean, "lowest final loss: " + std::string(aggregator_name(low_kind)));
  v.require(high_kind == AggregatorKind::kMedian, "highest final loss: " + std::string(aggregator_name(high_kind)));
  v.require(secs < 120.0, "runtime " + num(secs, 3) + "s < 120s");
  return v;
}

Verdict targeted_degradation(const CellResult& clean, const std::vector<CellResult>& grid, double grid_secs) {
  Verdict v;
  const std::pair<AttackKind, AggregatorKind> pairs[] = {
      {AttackKind::kLargeValue, AggregatorKind::kSampleMean},
      {AttackKind::kAlphaScm, AggregatorKind::kAlphaTrimmedMean},
      {AttackKind::kTalwarScm, AggregatorKind::kTalwar},
      {AttackKind::kTukeyScm, AggregatorKind::kBiweightTukey},
  };
  for (const auto& [attack, target] : pairs) {
    const auto it = std::find_if(grid.begin(), grid.end(),
                                 [&](const CellResult& r) { return r.cell.attack == attack && r.cell.malicious == 6; });
    const std::size_t col = column_of(*it, target);
    const double attacked = final_value(it->loss[col]);
    const double baseline = final_value(clean.loss[column_of(clean, target)]);
    const std::string tag = std::string(attack_name(attack)) + "->" + std::string(aggregator_name(target));
    v.require(attacked >= 10.0 * baseline, tag + " loss " + num(attacked) + " >= 10 x " + num(baseline));
    int worse = 0;
    for (std::size_t a = 0; a < it->aggregators.size(); ++a) {
      if (a != col && final_value(it->loss[a]) > attacked) ++worse;
    }
    v.require(worse <= 1, tag + " rank " + std::to_string(worse + 1) + " of 5 from worst");
  }
  v.require(grid_secs < 600.0, "4x4 grid runtime " + num(grid_secs, 3) + "s < 600s");
  return v;
}

Verdict robustness_inverse(const CellResult& clean, const std::vector<CellResult>& grid) {
  Verdict v;
  const auto it = std::find_if(grid.begin(), grid.end(), [](const CellResult& r) {
    return r.cell.attack == AttackKind::kLargeValue && r.cell.malicious == 3;
  });
  for (std::size_t a = 0; a < it->aggregators.size(); ++a) {
    const auto kind = it->aggregators[a];
    const double attacked = final_value(it->msd[a]);
    const double baseline = final_value(clean.msd[column_of(clean, kind)]);
    const std::string name(aggregator_name(kind));
    if (kind == AggregatorKind::kSampleMean) {
      v.require(attacked >= 1e3 * baseline, name + " MSD " + num(attacked) + " >= 1e3 x " + num(baseline));
    } else {
      v.require(attacked <= 10.0 * baseline, name + " MSD " + num(attacked) + " <= 10 x " + num(baseline));
    }
  }
  return v;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  Verdict v;
  const fs::path root = fs::temp_directory_path() / "scm_acceptance_determinism";
  fs::remove_all(root);

  ExperimentConfig sim = parse_config(R"(
[run]
seed = 11
repeats = 2
[topology]
agents = 16
malicious = 3
[learning]
iterations = 60
[attack]
kinds = none, lv, alpha_scm, talwar_scm, tukey_scm
[sweep]
grid_points = 101
[efficiency]
trials = 5000
)");
  using Command = std::function<CommandOutput(const ExperimentConfig&)>;
  const std::pair<std::string, Command> commands[] = {
      {"simulate", cmd_simulate}, {"sc-sweep", cmd_sc_sweep}, {"efficiency-check", cmd_efficiency_check}};
  for (const auto& [name, run] : commands) {
    ExperimentConfig first = sim;
    first.dir = (root / (name + "_a")).string();
    first.threads = 1;
    const auto a = run(first);
    // replay from the manifest alone, with a different thread count
    ExperimentConfig replay = parse_config(read_file(a.manifest));
    replay.dir = (root / (name + "_b")).string();
    replay.threads = worker_threads();
    const auto b = run(replay);
    bool same = a.files.size() == b.files.size();
    for (std::size_t i = 0; same && i < a.files.size(); ++i) same = read_file(a.files[i]) == read_file(b.files[i]);
    v.require(same, name + " " + std::to_string(a.files.size()) + " files byte-identical");
  }
  fs::remove_all(root);
  return v;
}

Verdict oracle_equivalence() {
  Verdict v;
  std::mt19937_64 rng(8675309);
  std::normal_distribution<double> normal;
  // even instances use the biweight, odd ones Talwar
  double worst[2] = {0.0, 0.0};
  int mismatched[2] = {0, 0}, unconverged = 0;
  for (int i = 0; i < 100; ++i) {
    const auto spec = i % 2 ? AggregatorSpec::talwar() : AggregatorSpec::tukey();
    const int n = std::uniform_int_distribution<int>(5, 60)(rng);
    std::vector<double> s(static_cast<std::size_t>(n));
    for (auto& x : s) x = normal(rng);
    const auto r = m_estimate(s, spec);
    if (!r.converged) ++unconverged;
    const double diff = std::abs(r.location - oracle::location_by_grid_search(spec.kind, s, spec.c));
    worst[i % 2] = std::max(worst[i % 2], diff);
    if (diff > 1e-6) ++mismatched[i % 2];
  }
  v.require(unconverged == 0, std::to_string(unconverged) + " unconverged");
  v.require(mismatched[0] == 0, "tukey vs grid search: " + std::to_string(mismatched[0]) + "/50 beyond 1e-6 (max " +
                                    num(worst[0]) + ")");
  v.require(mismatched[1] == 0, "talwar vs grid search: " + std::to_string(mismatched[1]) + "/50 beyond 1e-6 (max " +
                                    num(worst[1]) + ")");

  double fd_worst = 0.0;
  const double h = 1e-5;
  for (double delta : {0.5, 1.0, 2.0}) {
    for (int i = -200; i <= 200; ++i) {
      const double r = 0.0237 * i + 0.0011;
      if (std::abs(std::abs(r) - delta) < 2.0 * h) continue;  // finite differences straddle the kink
      const double fd = (huber_loss(r + h, delta) - huber_loss(r - h, delta)) / (2.0 * h);
      fd_worst = std::max(fd_worst, std::abs(fd - huber_grad_factor(r, delta)));
    }
  }
  v.require(fd_worst <= 1e-6, "huber_grad_factor vs central differences max |diff| " + num(fd_worst) + " <= 1e-6");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto wanted = [&](int c) { return only.empty() || only.count(c) > 0; };

  bool all_pass = true;
  auto report = [&](int id, const char* title, const Verdict& v) {
    std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.c_str());
    std::fflush(stdout);
    all_pass = all_pass && v.pass;
  };

  if (wanted(1)) report(1, "efficiency calibration", efficiency_calibration());
  if (wanted(2)) report(2, "SC shape", sc_shape());
  if (wanted(3)) report(3, "attack near-optimality", attack_near_optimality());

  if (wanted(4) || wanted(5) || wanted(6)) {
    const ExperimentConfig cfg = experiment_config();
    auto t0 = std::chrono::steady_clock::now();
    const CellResult clean = run_cell(cfg, {std::nullopt, 0});
    const double clean_secs = seconds_since(t0);
    if (wanted(4)) report(4, "no-attack baseline", no_attack_baseline(clean, clean_secs));

    if (wanted(5) || wanted(6)) {
      std::vector<CellResult> grid;
      t0 = std::chrono::steady_clock::now();
      for (auto attack : {AttackKind::kLargeValue, AttackKind::kAlphaScm, AttackKind::kTalwarScm, AttackKind::kTukeyScm}) {
        for (int b : {3, 6, 9, 12}) grid.push_back(run_cell(cfg, {attack, b}));
      }
      const double grid_secs = seconds_since(t0);
      if (wanted(5)) report(5, "targeted-attack degradation", targeted_degradation(clean, grid, grid_secs));
      if (wanted(6)) report(6, "robustness sanity inverse", robustness_inverse(clean, grid));
    }
  }

  if (wanted(7)) report(7, "determinism", determinism());
  if (wanted(8)) report(8, "oracle equivalence", oracle_equivalence());
  return all_pass ? 0 : 1;
}
