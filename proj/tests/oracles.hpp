#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "intent_rnnt/rnnt.hpp"
#include "test_support.hpp"

namespace testing {

using intent_rnnt::JointLattice;

inline JointLattice random_lattice(std::size_t T, std::size_t U, std::size_t V, Rng& rng) {
  return JointLattice::from_logits(random_tensor(T, V, rng, 2.0), random_tensor(U + 1, V, rng, 2.0));
}

inline std::vector<std::size_t> random_target(std::size_t U, std::size_t V, Rng& rng) {
  std::vector<std::size_t> y(U);
  for (auto& v : y) v = 1 + rng.below(V - 1);
  return y;
}

// Sums the probability of every blank/label interleaving explicitly.
inline double enumerate_paths(const JointLattice& lat, std::span<const std::size_t> y, std::size_t t = 0,
                              std::size_t u = 0) {
  const std::size_t T = lat.frames(), U = y.size();
  if (t == T - 1 && u == U) return std::exp(lat.at(t, u, 0));
  double total = 0.0;
  if (t + 1 < T) total += std::exp(lat.at(t, u, 0)) * enumerate_paths(lat, y, t + 1, u);
  if (u < U) total += std::exp(lat.at(t, u, y[u])) * enumerate_paths(lat, y, t, u + 1);
  return total;
}

}  // namespace testing
