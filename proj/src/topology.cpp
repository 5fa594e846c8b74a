#include "scm/topology.hpp"

#include <algorithm>
#include <numeric>

#include "scm/rng.hpp"

namespace scm {
namespace {

void check_agent(int agent_count, int k) {
  if (k < 0 || k >= agent_count) throw std::out_of_range("agent id " + std::to_string(k) + " out of range");
}

}  // namespace

Adjacency::Adjacency(int agent_count)
    : agent_count_(agent_count),
      bits_(static_cast<std::size_t>(agent_count) * static_cast<std::size_t>(agent_count), 0) {
  if (agent_count < 0) throw std::invalid_argument("negative agent count");
}

bool Adjacency::connected(int k, int l) const {
  check_agent(agent_count_, k);
  check_agent(agent_count_, l);
  return bits_[static_cast<std::size_t>(k) * agent_count_ + l] != 0;
}

void Adjacency::connect(int k, int l) {
  check_agent(agent_count_, k);
  check_agent(agent_count_, l);
  if (k == l) throw std::invalid_argument("self loops are not stored");
  bits_[static_cast<std::size_t>(k) * agent_count_ + l] = 1;
  bits_[static_cast<std::size_t>(l) * agent_count_ + k] = 1;
}

std::size_t Adjacency::edge_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)) / 2;
}

int NetworkTopology::malicious_count() const {
  return static_cast<int>(std::count(roles.begin(), roles.end(), Role::kMalicious));
}

Adjacency erdos_renyi(int agent_count, double p, std::uint64_t seed) {
  if (agent_count < 2) throw std::invalid_argument("erdos_renyi: need at least 2 agents");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("erdos_renyi: p must lie in (0, 1]");
  Adjacency adj(agent_count);
  Rng rng(seed);
  for (int k = 0; k < agent_count; ++k) {
    for (int l = k + 1; l < agent_count; ++l) {
      if (uniform01(rng) < p) adj.connect(k, l);
    }
  }
  return adj;
}

std::vector<int> neighborhood(const NetworkTopology& t, int k) {
  const int n = t.agent_count();
  check_agent(n, k);
  std::vector<int> out;
  for (int l = 0; l < n; ++l) {
    if (l == k || t.adjacency.connected(k, l)) out.push_back(l);
  }
  return out;
}

bool benign_majority_holds(const NetworkTopology& t) {
  for (int k = 0; k < t.agent_count(); ++k) {
    if (t.is_malicious(k)) continue;
    int benign = 0;
    int malicious = 0;
    for (int l : neighborhood(t, k)) (t.is_malicious(l) ? malicious : benign)++;
    if (benign <= malicious) return false;
  }
  return true;
}

bool benign_subgraph_connected(const NetworkTopology& t) {
  const int n = t.agent_count();
  int start = -1;
  int benign_total = 0;
  for (int k = 0; k < n; ++k) {
    if (!t.is_malicious(k)) {
      ++benign_total;
      if (start < 0) start = k;
    }
  }
  if (benign_total == 0) return true;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::vector<int> stack{start};
  seen[static_cast<std::size_t>(start)] = true;
  int reached = 0;
  while (!stack.empty()) {
    const int k = stack.back();
    stack.pop_back();
    ++reached;
    for (int l = 0; l < n; ++l) {
      if (!seen[static_cast<std::size_t>(l)] && !t.is_malicious(l) && t.adjacency.connected(k, l)) {
        seen[static_cast<std::size_t>(l)] = true;
        stack.push_back(l);
      }
    }
  }
  return reached == benign_total;
}

NetworkTopology assign_roles(const Adjacency& adjacency, int num_malicious, std::uint64_t seed, int max_attempts) {
  const int n = adjacency.agent_count();
  if (num_malicious < 0 || 2 * num_malicious >= n) {
    throw std::invalid_argument("assign_roles: need 0 <= num_malicious < K/2");
  }
  if (max_attempts < 1) throw std::invalid_argument("assign_roles: max_attempts must be >= 1");
  Rng rng(seed);
  std::vector<int> ids(static_cast<std::size_t>(n));
  bool majority_failed = false;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::iota(ids.begin(), ids.end(), 0);
    // Partial Fisher-Yates: the first num_malicious ids form the subset.
    for (int i = 0; i < num_malicious; ++i) {
      const int j = i + static_cast<int>(uniform01(rng) * (n - i));
      std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
    }
    NetworkTopology t{adjacency, std::vector<Role>(static_cast<std::size_t>(n), Role::kBenign)};
    for (int i = 0; i < num_malicious; ++i) t.roles[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])] = Role::kMalicious;
    if (!benign_majority_holds(t)) {
      majority_failed = true;
      continue;
    }
    if (!benign_subgraph_connected(t)) continue;
    return t;
  }
  throw GenerationError(std::string("assign_roles: no valid assignment after ") + std::to_string(max_attempts) +
                        " attempts (" + (majority_failed ? "benign majority" : "benign connectivity") +
                        " constraint failed)");
}

NetworkTopology generate_topology(int agent_count, double p, int num_malicious, std::uint64_t seed, int max_graphs) {
  std::string last_error;
  for (int g = 0; g < max_graphs; ++g) {
    const Adjacency adj = erdos_renyi(agent_count, p, derive_seed(seed, Stream::kTopology, static_cast<std::uint64_t>(g)));
    try {
      return assign_roles(adj, num_malicious, derive_seed(seed, Stream::kRoles, static_cast<std::uint64_t>(g)));
    } catch (const GenerationError& e) {
      last_error = e.what();
    }
  }
  throw GenerationError("generate_topology: exhausted " + std::to_string(max_graphs) + " graphs; last: " + last_error);
}

void write_topology(std::ostream& out, const NetworkTopology& t) {
  const int n = t.agent_count();
  for (int k = 0; k < n; ++k) {
    for (int l = k + 1; l < n; ++l) {
      if (t.adjacency.connected(k, l)) out << k << ' ' << l << '\n';
    }
  }
  for (int k = 0; k < n; ++k) out << k << ' ' << (t.is_malicious(k) ? 'M' : 'B') << '\n';
}

}  // namespace scm
