#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "scm/attacks.hpp"
#include "scm/estimators.hpp"
#include "scm/rng.hpp"
#include "scm/topology.hpp"

namespace scm {

// d = u^T w_true + v, u ~ N(0, I), v ~ N(0, noise_var).
struct LinearModelConfig {
  int dim = 10;
  WeightVector w_true;
  double noise_var = 0.01;
  int samples_per_agent_per_iter = 1;

  void validate() const;
};

// w_true drawn from N(0, I) with the given seed.
WeightVector draw_true_model(int dim, std::uint64_t seed);

struct LearningConfig {
  double step_size = 0.05;
  int iterations = 300;
  double huber_delta = 1.0;
  // Every agent starts at the zero vector.

  void validate() const;
};

struct Sample {
  WeightVector u;
  double d = 0.0;
};

Sample generate_sample(const LinearModelConfig& model, Rng& rng);

double huber_loss(double residual, double delta);
// psi_H(r): r clipped to [-delta, delta]. The per-sample gradient is -psi_H(d - u^T w) u.
double huber_grad_factor(double residual, double delta);

// Mean Huber gradient of the batch at w.
WeightVector batch_gradient(const WeightVector& w, std::span<const Sample> batch, double delta);

// phi = w - mu * mean gradient.
WeightVector adapt(const WeightVector& w, std::span<const Sample> batch, const LearningConfig& cfg);

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Aggregates the vectors received by k. `received` must hold exactly one entry
// per member of k's neighborhood, k included.
WeightVector combine(const NetworkTopology& t, int k, const std::map<int, WeightVector>& received,
                     const AggregatorSpec& agg, AggregateStats* stats = nullptr);

// Weights beyond this magnitude mark a run as diverged; the trace then holds
// this value from that iteration on.
inline constexpr double kDivergenceSentinel = 1e30;

struct IterationRecord {
  int iteration = 0;
  double loss = 0.0;  // mean benign Huber loss on the iteration's batch
  double msd = 0.0;   // mean benign ||w_k - w_true||^2
  std::size_t nonconverged = 0;
  bool diverged = false;
};

struct ExperimentTrace {
  AggregatorSpec aggregator;
  double initial_msd = 0.0;
  std::vector<IterationRecord> records;
  std::vector<WeightVector> final_benign_weights;
  bool diverged = false;
};

// Full adapt-then-combine run. Benign agent k draws its data from
// derive_seed(seed, kAgentData, k), so the data stream does not depend on the
// aggregator or the attack.
ExperimentTrace run_experiment(const NetworkTopology& topology, const LinearModelConfig& model,
                               const LearningConfig& learning, const AggregatorSpec& agg,
                               const std::optional<AttackSpec>& attack, std::uint64_t seed);

// Largest ||w_k - w_l|| over pairs of final benign weights.
double max_pairwise_disagreement(const ExperimentTrace& trace);

}  // namespace scm
