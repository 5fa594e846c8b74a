#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace scm {

// Simple undirected graph; no self loops are stored.
class Adjacency {
 public:
  Adjacency() = default;
  explicit Adjacency(int agent_count);

  int agent_count() const { return agent_count_; }
  bool connected(int k, int l) const;
  void connect(int k, int l);
  std::size_t edge_count() const;

  bool operator==(const Adjacency&) const = default;

 private:
  int agent_count_ = 0;
  std::vector<std::uint8_t> bits_;
};

enum class Role : std::uint8_t { kBenign, kMalicious };

struct NetworkTopology {
  Adjacency adjacency;
  std::vector<Role> roles;

  int agent_count() const { return adjacency.agent_count(); }
  bool is_malicious(int k) const { return roles.at(static_cast<std::size_t>(k)) == Role::kMalicious; }
  int malicious_count() const;

  bool operator==(const NetworkTopology&) const = default;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Each unordered pair joined independently with probability p.
Adjacency erdos_renyi(int agent_count, double p, std::uint64_t seed);

inline constexpr int kDefaultRoleAttempts = 100;
inline constexpr int kDefaultGraphAttempts = 100;

// Uniformly random malicious subset, resampled until every benign agent has a
// benign majority in its neighborhood (self included) and the benign subgraph
// is connected. Throws GenerationError naming the failing constraint.
NetworkTopology assign_roles(const Adjacency& adjacency, int num_malicious, std::uint64_t seed,
                             int max_attempts = kDefaultRoleAttempts);

// erdos_renyi + assign_roles, redrawing the graph when role assignment fails.
NetworkTopology generate_topology(int agent_count, double p, int num_malicious, std::uint64_t seed,
                                  int max_graphs = kDefaultGraphAttempts);

// Adjacency row of k plus k itself, ascending.
std::vector<int> neighborhood(const NetworkTopology& t, int k);

bool benign_majority_holds(const NetworkTopology& t);
bool benign_subgraph_connected(const NetworkTopology& t);

// "k l" per edge (k < l), then "k B|M" per agent.
void write_topology(std::ostream& out, const NetworkTopology& t);

}  // namespace scm
