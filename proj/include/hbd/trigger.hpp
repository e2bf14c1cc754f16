#pragma once

// Position-adaptive sparse trigger (additive form) and the uniform-scale
// Euclidean baseline.

#include "hbd/geometry.hpp"

#include <cstdint>
#include <span>

namespace hbd {

struct TriggerSpec {
  Eigen::VectorXd delta;           // sparse direction
  double alpha = 0.35;             // base strength
  double beta = 1.0;               // adaptation exponent in [0, 1]
  double noise_sigma = 0.01;       // per-coordinate Gaussian noise
  double projection_radius = 0.95;
  double sparsity_fraction = 0.30;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
  /// ceil(sparsity_fraction * n).
  std::size_t max_support() const;
};

enum class TriggerMode { adaptive, euclidean_baseline };

struct TriggeredPoint {
  BallPoint original;
  BallPoint triggered;
  double euclidean_delta = 0.0;  // |triggered - original|
  double geodesic_delta = 0.0;   // d_g(original, triggered)
};

/// s(x) = alpha (lambda_0 / lambda_x)^beta = alpha (1 - |x|^2)^beta.
double adaptive_scale(const BallPoint& x, double alpha, double beta);

/// x + s(x) delta + xi, then radial projection onto the ball of radius rho.
TriggeredPoint apply_trigger(const BallPoint& x, const TriggerSpec& spec, std::uint64_t rng_seed);

/// Same pipeline with the constant scale alpha.
TriggeredPoint euclidean_baseline_trigger(const BallPoint& x, const TriggerSpec& spec, std::uint64_t rng_seed);

TriggeredPoint trigger_point(const BallPoint& x, const TriggerSpec& spec, TriggerMode mode, std::uint64_t rng_seed);

/// Radial projection: rescales v onto the sphere of the given radius if it lies outside.
Eigen::VectorXd project_to_radius(const Eigen::VectorXd& v, double radius);

/// Per-coordinate separation score |mean_t - mean_rest| / pooled_sd used to pick
/// the trigger support. Coordinates with zero pooled spread score +inf when
/// the means differ and 0 otherwise.
Eigen::VectorXd separation_scores(const Eigen::MatrixXd& features, std::span<const int> labels, int target);

/// Unit-norm direction with exactly min(k, n) nonzero entries: the top-k
/// coordinates by separation score, each signed toward the target-class mean.
/// Ties are broken toward the lower coordinate index.
Eigen::VectorXd make_sparse_direction(const Eigen::MatrixXd& features, std::span<const int> labels, int target,
                                      std::size_t k);

}  // namespace hbd
