#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace hbd {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; derives independent stream seeds from (seed, index).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Eigen::VectorXd gaussian_vector(Rng& rng, Eigen::Index n, double sigma = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = sigma * normal(rng);
  return v;
}

inline Eigen::VectorXd random_unit_vector(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v;
  do {
    v = gaussian_vector(rng, n);
  } while (v.norm() == 0.0);
  return v.normalized();
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace hbd
