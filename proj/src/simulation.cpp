#include "scm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scm {
namespace {

double squared_distance(const WeightVector& a, const WeightVector& b) {
  double sum = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    const double diff = a[m] - b[m];
    sum += diff * diff;
  }
  return sum;
}

double dot(const WeightVector& a, const WeightVector& b) {
  double sum = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) sum += a[m] * b[m];
  return sum;
}

bool out_of_range(const WeightVector& w) {
  return std::any_of(w.begin(), w.end(), [](double x) { return !(std::abs(x) <= kDivergenceSentinel); });
}

}  // namespace

void LinearModelConfig::validate() const {
  if (dim < 1) throw std::invalid_argument("model dim must be >= 1");
  if (static_cast<int>(w_true.size()) != dim) throw std::invalid_argument("w_true has the wrong dimension");
  if (!(noise_var > 0.0)) throw std::invalid_argument("noise_var must be positive");
  if (samples_per_agent_per_iter < 1) throw std::invalid_argument("batch size must be >= 1");
}

void LearningConfig::validate() const {
  if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (!(huber_delta > 0.0)) throw std::invalid_argument("huber_delta must be positive");
}

WeightVector draw_true_model(int dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  WeightVector w(static_cast<std::size_t>(dim));
  for (auto& x : w) x = normal(rng);
  return w;
}

Sample generate_sample(const LinearModelConfig& model, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Sample s;
  s.u.resize(static_cast<std::size_t>(model.dim));
  for (auto& x : s.u) x = normal(rng);
  s.d = dot(s.u, model.w_true) + std::sqrt(model.noise_var) * normal(rng);
  return s;
}

double huber_loss(double residual, double delta) {
  const double a = std::abs(residual);
  return a <= delta ? 0.5 * residual * residual : delta * a - 0.5 * delta * delta;
}

double huber_grad_factor(double residual, double delta) { return std::clamp(residual, -delta, delta); }

WeightVector batch_gradient(const WeightVector& w, std::span<const Sample> batch, double delta) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  WeightVector grad(w.size(), 0.0);
  for (const auto& s : batch) {
    const double g = huber_grad_factor(s.d - dot(s.u, w), delta);
    for (std::size_t m = 0; m < w.size(); ++m) grad[m] -= g * s.u[m];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& g : grad) g *= inv;
  return grad;
}

WeightVector adapt(const WeightVector& w, std::span<const Sample> batch, const LearningConfig& cfg) {
  const WeightVector grad = batch_gradient(w, batch, cfg.huber_delta);
  WeightVector phi = w;
  for (std::size_t m = 0; m < w.size(); ++m) phi[m] -= cfg.step_size * grad[m];
  return phi;
}

WeightVector combine(const NetworkTopology& t, int k, const std::map<int, WeightVector>& received,
                     const AggregatorSpec& agg, AggregateStats* stats) {
  const std::vector<int> hood = neighborhood(t, k);
  if (received.size() != hood.size()) {
    throw ProtocolError("combine: agent " + std::to_string(k) + " received " + std::to_string(received.size()) +
                        " vectors for a neighborhood of " + std::to_string(hood.size()));
  }
  std::vector<WeightVector> vectors;
  vectors.reserve(hood.size());
  for (int l : hood) {
    const auto it = received.find(l);
    if (it == received.end()) {
      throw ProtocolError("combine: agent " + std::to_string(k) + " is missing neighbor " + std::to_string(l));
    }
    vectors.push_back(it->second);
  }
  return aggregate(agg, vectors, stats);
}

ExperimentTrace run_experiment(const NetworkTopology& topology, const LinearModelConfig& model,
                               const LearningConfig& learning, const AggregatorSpec& agg,
                               const std::optional<AttackSpec>& attack, std::uint64_t seed) {
  model.validate();
  learning.validate();
  agg.validate();
  if (attack) attack->validate();
  const int n = topology.agent_count();
  if (static_cast<int>(topology.roles.size()) != n) throw std::invalid_argument("topology roles size mismatch");
  if (topology.malicious_count() > 0 && !attack) {
    throw std::invalid_argument("run_experiment: malicious agents present but no attack configured");
  }

  std::vector<int> benign;
  for (int k = 0; k < n; ++k) {
    if (!topology.is_malicious(k)) benign.push_back(k);
  }
  std::vector<std::vector<int>> hoods(static_cast<std::size_t>(n));
  for (int k : benign) hoods[static_cast<std::size_t>(k)] = neighborhood(topology, k);

  std::vector<Rng> rngs;
  rngs.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) rngs.emplace_back(derive_seed(seed, Stream::kAgentData, static_cast<std::uint64_t>(k)));

  const auto dim = static_cast<std::size_t>(model.dim);
  std::vector<WeightVector> w(static_cast<std::size_t>(n), WeightVector(dim, 0.0));
  std::vector<WeightVector> phi(static_cast<std::size_t>(n));
  std::vector<std::vector<Sample>> batches(static_cast<std::size_t>(n));

  ExperimentTrace trace;
  trace.aggregator = agg;
  for (int k : benign) trace.initial_msd += squared_distance(w[static_cast<std::size_t>(k)], model.w_true);
  trace.initial_msd /= static_cast<double>(benign.size());
  trace.records.reserve(static_cast<std::size_t>(learning.iterations));

  for (int i = 1; i <= learning.iterations; ++i) {
    if (trace.diverged) {
      trace.records.push_back({i, kDivergenceSentinel, kDivergenceSentinel, 0, true});
      continue;
    }
    for (int k : benign) {
      auto& batch = batches[static_cast<std::size_t>(k)];
      batch.clear();
      for (int b = 0; b < model.samples_per_agent_per_iter; ++b) {
        batch.push_back(generate_sample(model, rngs[static_cast<std::size_t>(k)]));
      }
      phi[static_cast<std::size_t>(k)] = adapt(w[static_cast<std::size_t>(k)], batch, learning);
    }

    AggregateStats stats;
    std::vector<WeightVector> next(static_cast<std::size_t>(n));
    for (int k : benign) {
      const auto& hood = hoods[static_cast<std::size_t>(k)];
      std::map<int, WeightVector> received;
      std::vector<WeightVector> benign_phis;
      int malicious = 0;
      for (int l : hood) {
        if (topology.is_malicious(l)) {
          ++malicious;
        } else {
          received.emplace(l, phi[static_cast<std::size_t>(l)]);
          benign_phis.push_back(phi[static_cast<std::size_t>(l)]);
        }
      }
      if (malicious > 0) {
        const WeightVector crafted = craft_attack(CraftingContext::from_vectors(benign_phis, malicious), *attack);
        for (int l : hood) {
          if (topology.is_malicious(l)) received.emplace(l, crafted);
        }
      }
      next[static_cast<std::size_t>(k)] = combine(topology, k, received, agg, &stats);
    }

    IterationRecord rec;
    rec.iteration = i;
    rec.nonconverged = stats.nonconverged_coordinates;
    for (int k : benign) {
      w[static_cast<std::size_t>(k)] = std::move(next[static_cast<std::size_t>(k)]);
      const auto& wk = w[static_cast<std::size_t>(k)];
      if (out_of_range(wk)) rec.diverged = true;
      double loss = 0.0;
      for (const auto& s : batches[static_cast<std::size_t>(k)]) loss += huber_loss(s.d - dot(s.u, wk), learning.huber_delta);
      rec.loss += loss / static_cast<double>(batches[static_cast<std::size_t>(k)].size());
      rec.msd += squared_distance(wk, model.w_true);
    }
    rec.loss /= static_cast<double>(benign.size());
    rec.msd /= static_cast<double>(benign.size());
    if (rec.diverged || !(rec.loss <= kDivergenceSentinel) || !(rec.msd <= kDivergenceSentinel)) {
      rec.diverged = true;
      rec.loss = kDivergenceSentinel;
      rec.msd = kDivergenceSentinel;
      trace.diverged = true;
    }
    trace.records.push_back(rec);
  }

  for (int k : benign) trace.final_benign_weights.push_back(w[static_cast<std::size_t>(k)]);
  return trace;
}

double max_pairwise_disagreement(const ExperimentTrace& trace) {
  double worst = 0.0;
  const auto& ws = trace.final_benign_weights;
  for (std::size_t a = 0; a < ws.size(); ++a) {
    for (std::size_t b = a + 1; b < ws.size(); ++b) worst = std::max(worst, std::sqrt(squared_distance(ws[a], ws[b])));
  }
  return worst;
}

}  // namespace scm
