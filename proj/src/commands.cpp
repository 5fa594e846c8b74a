#include "scm/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "scm/rng.hpp"

namespace scm {
namespace {

// Runs task(0..count-1) on up to `threads` workers. The first exception is
// rethrown after all workers stop.
template <class Task>
void parallel_for(std::size_t count, int threads, Task&& task) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string describe(const GridCell& cell) {
  return "attack=" + (cell.attack ? std::string(attack_name(*cell.attack)) : std::string("none")) +
         " malicious=" + std::to_string(cell.malicious);
}

std::string edge_tag(double p) {
  // 0.7 -> "07", 0.75 -> "075"
  std::ostringstream s;
  s << std::setprecision(6) << p;
  std::string text = s.str();
  text.erase(std::remove(text.begin(), text.end(), '.'), text.end());
  return text;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

void close_output(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
  }
}

std::filesystem::path write_manifest(const ExperimentConfig& cfg, std::string_view command,
                                     const std::vector<std::string>& provenance,
                                     const std::vector<std::filesystem::path>& files) {
  const std::filesystem::path path = std::filesystem::path(cfg.dir) / "manifest.ini";
  auto out = open_output(path);
  out << "# scm_sim manifest; rerun with: scm_sim " << command << " --config manifest.ini\n";
  out << "# version = " << kVersion << '\n';
  out << "# command = " << command << '\n';
  out << "# master_seed = " << cfg.seed << '\n';
  for (const auto& line : provenance) out << "# " << line << '\n';
  for (const auto& f : files) out << "# output = " << f.filename().string() << '\n';
  out << to_text(cfg);
  close_output(out, path);
  return path;
}

}  // namespace

std::vector<GridCell> simulation_grid(const ExperimentConfig& cfg) {
  std::vector<GridCell> cells;
  for (const auto& attack : cfg.attacks) {
    if (!attack) {
      cells.push_back({std::nullopt, 0});
      continue;
    }
    for (int b : cfg.malicious) {
      if (b > 0) cells.push_back({attack, b});
    }
  }
  return cells;
}

RepeatSeeds repeat_seeds(const ExperimentConfig& cfg, int repeat) {
  RepeatSeeds s;
  s.repeat = derive_seed(cfg.seed, Stream::kRepeat, static_cast<std::uint64_t>(repeat));
  s.topology = cfg.topology_seed.value_or(derive_seed(s.repeat, Stream::kTopology));
  s.true_model = cfg.w_seed.value_or(derive_seed(s.repeat, Stream::kTrueModel));
  s.data = derive_seed(s.repeat, Stream::kAgentData);
  return s;
}

CellResult run_cell(const ExperimentConfig& cfg, const GridCell& cell) {
  try {
    CellResult result;
    result.cell = cell;
    result.aggregators = cfg.aggregators;
    const std::size_t n_agg = cfg.aggregators.size();
    const auto n_rep = static_cast<std::size_t>(cfg.repeats);

    std::vector<LinearModelConfig> models(n_rep);
    std::vector<RepeatSeeds> seeds(n_rep);
    for (std::size_t r = 0; r < n_rep; ++r) {
      seeds[r] = repeat_seeds(cfg, static_cast<int>(r));
      result.topologies.push_back(generate_topology(cfg.agents, cfg.edge_probability, cell.malicious, seeds[r].topology));
      models[r].dim = cfg.dim;
      models[r].noise_var = cfg.noise_var;
      models[r].samples_per_agent_per_iter = cfg.batch_size;
      models[r].w_true = draw_true_model(cfg.dim, seeds[r].true_model);
    }
    LearningConfig learning;
    learning.step_size = cfg.step_size;
    learning.iterations = cfg.iterations;
    learning.huber_delta = cfg.huber_delta;
    std::optional<AttackSpec> attack;
    if (cell.attack) attack = make_attack(cfg, *cell.attack);

    std::vector<ExperimentTrace> traces(n_agg * n_rep);
    parallel_for(traces.size(), cfg.threads, [&](std::size_t task) {
      const std::size_t a = task / n_rep;
      const std::size_t r = task % n_rep;
      traces[task] = run_experiment(result.topologies[r], models[r], learning, make_aggregator(cfg, cfg.aggregators[a]),
                                    attack, seeds[r].data);
    });

    const auto iters = static_cast<std::size_t>(cfg.iterations);
    result.loss.assign(n_agg, std::vector<double>(iters, 0.0));
    result.msd.assign(n_agg, std::vector<double>(iters, 0.0));
    result.initial_msd.assign(n_agg, 0.0);
    for (std::size_t a = 0; a < n_agg; ++a) {
      for (std::size_t r = 0; r < n_rep; ++r) {
        const auto& trace = traces[a * n_rep + r];
        result.initial_msd[a] += trace.initial_msd / static_cast<double>(n_rep);
        for (std::size_t i = 0; i < iters; ++i) {
          const auto& rec = trace.records[i];
          result.loss[a][i] += rec.loss / static_cast<double>(n_rep);
          result.msd[a][i] += rec.msd / static_cast<double>(n_rep);
        }
      }
      for (std::size_t i = 0; i < iters; ++i) {
        for (std::size_t r = 0; r < n_rep; ++r) {
          if (traces[a * n_rep + r].records[i].diverged) {
            result.loss[a][i] = kDivergenceSentinel;
            result.msd[a][i] = kDivergenceSentinel;
          }
        }
      }
    }
    return result;
  } catch (const std::exception& e) {
    throw std::runtime_error("run " + describe(cell) + ": " + e.what());
  }
}

void write_trace_csv(std::ostream& out, const CellResult& result, Metric metric) {
  const auto& series = metric == Metric::kLoss ? result.loss : result.msd;
  out << "iteration";
  for (auto kind : result.aggregators) out << ',' << metric_name(metric) << '_' << aggregator_name(kind);
  out << '\n';
  const std::size_t iters = series.empty() ? 0 : series.front().size();
  for (std::size_t i = 0; i < iters; ++i) {
    out << (i + 1);
    for (const auto& column : series) out << ',' << column[i];
    out << '\n';
  }
}

std::string trace_file_name(const ExperimentConfig& cfg, const GridCell& cell, Metric metric) {
  const std::string prefix = metric == Metric::kLoss ? "train_loss" : "msd";
  const std::string attack = cell.attack ? std::string(attack_file_tag(*cell.attack)) : std::string("none");
  return prefix + "_edge_" + edge_tag(cfg.edge_probability) + "_mal_" + std::to_string(cell.malicious) + "_out_" +
         attack + ".csv";
}

CommandOutput cmd_simulate(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::filesystem::path dir(cfg.dir);
  ensure_directory(dir);
  CommandOutput output;
  std::vector<std::string> provenance;
  for (int r = 0; r < cfg.repeats; ++r) {
    const auto s = repeat_seeds(cfg, r);
    provenance.push_back("repeat " + std::to_string(r) + ": repeat_seed=" + std::to_string(s.repeat) +
                         " topology_seed=" + std::to_string(s.topology) + " w_seed=" + std::to_string(s.true_model) +
                         " data_seed=" + std::to_string(s.data));
  }
  for (const auto& cell : simulation_grid(cfg)) {
    const CellResult result = run_cell(cfg, cell);
    for (auto metric : cfg.metrics) {
      const auto path = dir / trace_file_name(cfg, cell, metric);
      auto out = open_output(path);
      write_trace_csv(out, result, metric);
      close_output(out, path);
      output.files.push_back(path);
    }
    for (std::size_t r = 0; r < result.topologies.size(); ++r) {
      const auto path = dir / ("topology_edge_" + edge_tag(cfg.edge_probability) + "_mal_" +
                               std::to_string(cell.malicious) + "_rep_" + std::to_string(r) + ".txt");
      if (std::find(output.files.begin(), output.files.end(), path) != output.files.end()) continue;
      auto out = open_output(path);
      write_topology(out, result.topologies[r]);
      close_output(out, path);
      output.files.push_back(path);
    }
  }
  output.manifest = write_manifest(cfg, "simulate", provenance, output.files);
  return output;
}

std::vector<double> sweep_base(const ExperimentConfig& cfg) {
  Rng rng(cfg.base_seed.value_or(derive_seed(cfg.seed, Stream::kSweepBase)));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> base(static_cast<std::size_t>(cfg.base_size));
  for (auto& y : base) y = normal(rng);
  return base;
}

std::optional<double> analytic_attack_value(const AggregatorSpec& agg, std::span<const double> base, int count,
                                            std::optional<double> epsilon) {
  switch (agg.kind) {
    case AggregatorKind::kAlphaTrimmedMean:
      return alpha_scm_value(base, count, agg.alpha, epsilon.value_or(default_epsilon(base)));
    case AggregatorKind::kTalwar:
    case AggregatorKind::kBiweightTukey: return mestimator_scm(base, count, agg.kind, agg.c).z_opt;
    default: return std::nullopt;
  }
}

std::vector<ScMarker> sc_markers(const ExperimentConfig& cfg, std::span<const double> base) {
  std::vector<ScMarker> markers;
  for (auto kind : cfg.sweep_aggregators) {
    const AggregatorSpec agg = make_aggregator(cfg, kind);
    const auto z = analytic_attack_value(agg, base, cfg.outlier_count, cfg.epsilon);
    if (!z) continue;
    markers.push_back({kind, *z, sensitivity_curve_multi(agg, base, *z, cfg.outlier_count)});
  }
  return markers;
}

CommandOutput cmd_sc_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::filesystem::path dir(cfg.dir);
  ensure_directory(dir);
  const auto base = sweep_base(cfg);
  std::vector<double> grid(static_cast<std::size_t>(cfg.grid_points));
  for (std::size_t j = 0; j < grid.size(); ++j) {
    grid[j] = grid.size() == 1 ? cfg.z_min
                               : cfg.z_min + (cfg.z_max - cfg.z_min) * static_cast<double>(j) /
                                                 static_cast<double>(grid.size() - 1);
  }
  std::vector<AggregatorSpec> aggs;
  for (auto kind : cfg.sweep_aggregators) aggs.push_back(make_aggregator(cfg, kind));

  CommandOutput output;
  const auto table = sc_sweep(aggs, base, grid, cfg.outlier_count);
  const auto sc_path = dir / "SC.csv";
  auto out = open_output(sc_path);
  write_sc_csv(out, table);
  close_output(out, sc_path);
  output.files.push_back(sc_path);

  if (cfg.markers) {
    const auto max_path = dir / "SC_max.csv";
    auto mout = open_output(max_path);
    mout << "z_opt,sc,aggregator\n";
    for (const auto& m : sc_markers(cfg, base)) mout << m.z_opt << ',' << m.sc << ',' << aggregator_name(m.aggregator) << '\n';
    close_output(mout, max_path);
    output.files.push_back(max_path);
  }
  const std::string base_seed = std::to_string(cfg.base_seed.value_or(derive_seed(cfg.seed, Stream::kSweepBase)));
  output.manifest = write_manifest(cfg, "sc-sweep", {"base_seed_resolved=" + base_seed}, output.files);
  return output;
}

std::vector<EfficiencyRow> efficiency_check(std::span<const AggregatorSpec> estimators, int trials, int sample_size,
                                            std::uint64_t seed, int threads) {
  if (trials < 2 || sample_size < 1) throw std::invalid_argument("efficiency_check: need trials >= 2, sample_size >= 1");
  constexpr std::size_t kBatches = 20;
  const std::size_t n_est = estimators.size() + 1;  // slot 0: sample mean reference

  struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;
    double variance() const {
      const double n = static_cast<double>(count);
      return (sum_sq - sum * sum / n) / (n - 1.0);
    }
  };
  std::vector<std::vector<Moments>> batches(kBatches, std::vector<Moments>(n_est));

  parallel_for(kBatches, threads, [&](std::size_t b) {
    const auto t = static_cast<std::size_t>(trials);
    const std::size_t begin = t * b / kBatches;
    const std::size_t end = t * (b + 1) / kBatches;
    Rng rng(derive_seed(seed, Stream::kEfficiency, b));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> sample(static_cast<std::size_t>(sample_size));
    auto& moments = batches[b];
    for (std::size_t trial = begin; trial < end; ++trial) {
      for (auto& y : sample) y = normal(rng);
      for (std::size_t e = 0; e < n_est; ++e) {
        const double v = e == 0 ? sample_mean(sample) : estimate(estimators[e - 1], sample);
        moments[e].sum += v;
        moments[e].sum_sq += v * v;
        ++moments[e].count;
      }
    }
  });

  std::vector<Moments> pooled(n_est);
  for (const auto& batch : batches) {
    for (std::size_t e = 0; e < n_est; ++e) {
      pooled[e].sum += batch[e].sum;
      pooled[e].sum_sq += batch[e].sum_sq;
      pooled[e].count += batch[e].count;
    }
  }
  std::vector<EfficiencyRow> rows;
  for (std::size_t e = 1; e < n_est; ++e) {
    EfficiencyRow row{estimators[e - 1].kind};
    row.variance = pooled[e].variance();
    row.efficiency = pooled[0].variance() / row.variance;
    double mean_ratio = 0.0;
    double sq = 0.0;
    std::size_t used = 0;
    for (const auto& batch : batches) {
      if (batch[e].count < 2) continue;
      const double ratio = batch[0].variance() / batch[e].variance();
      mean_ratio += ratio;
      sq += ratio * ratio;
      ++used;
    }
    if (used > 1) {
      mean_ratio /= static_cast<double>(used);
      const double sd = std::sqrt(std::max(0.0, (sq - static_cast<double>(used) * mean_ratio * mean_ratio) /
                                                    static_cast<double>(used - 1)));
      const double half = 1.96 * sd / std::sqrt(static_cast<double>(used));
      row.ci_low = row.efficiency - half;
      row.ci_high = row.efficiency + half;
    } else {
      row.ci_low = row.ci_high = row.efficiency;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_efficiency_csv(std::ostream& out, std::span<const EfficiencyRow> rows) {
  out << "estimator,variance,efficiency,ci_low,ci_high\n";
  for (const auto& r : rows) {
    out << aggregator_name(r.estimator) << ',' << r.variance << ',' << r.efficiency << ',' << r.ci_low << ','
        << r.ci_high << '\n';
  }
}

CommandOutput cmd_efficiency_check(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::filesystem::path dir(cfg.dir);
  ensure_directory(dir);
  std::vector<AggregatorSpec> estimators;
  for (auto kind : cfg.efficiency_estimators) estimators.push_back(make_aggregator(cfg, kind));
  const std::uint64_t seed = derive_seed(cfg.seed, Stream::kEfficiency);
  const auto rows = efficiency_check(estimators, cfg.trials, cfg.sample_size, seed, cfg.threads);
  CommandOutput output;
  const auto path = dir / "efficiency.csv";
  auto out = open_output(path);
  write_efficiency_csv(out, rows);
  close_output(out, path);
  output.files.push_back(path);
  output.manifest = write_manifest(cfg, "efficiency-check", {"efficiency_seed=" + std::to_string(seed)}, output.files);
  return output;
}

}  // namespace scm
