#pragma once

#include <random>

#include <Eigen/Core>

namespace qbvi {

/// The single generator type used throughout; every random quantity in a run
/// derives from one seeded instance.
using Rng = std::mt19937_64;

inline Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = z(rng);
  return out;
}

}  // namespace qbvi
