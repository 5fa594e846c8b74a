#pragma once

#include <cstdint>
#include <random>

namespace scm {

using Rng = std::mt19937_64;

// Independent stream tags for seed derivation. Changing a value changes every
// derived stream, so these are part of the reproducibility contract.
enum class Stream : std::uint64_t {
  kTopology = 1,
  kRoles = 2,
  kTrueModel = 3,
  kAgentData = 4,
  kRepeat = 5,
  kSweepBase = 6,
  kEfficiency = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of stream (tag, index) under `master`. Independent of call order.
inline std::uint64_t derive_seed(std::uint64_t master, Stream tag, std::uint64_t index = 0) {
  return splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(tag) ^ splitmix64(index)));
}

// Uniform on [0, 1) from the top 53 bits; avoids the implementation latitude of
// std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace scm
