#include "hbd/trigger.hpp"

#include "hbd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hbd {

void TriggerSpec::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("TriggerSpec: alpha must be > 0");
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("TriggerSpec: beta must lie in [0, 1]");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("TriggerSpec: noise_sigma must be >= 0");
  if (!(projection_radius > 0.0 && projection_radius < 1.0)) {
    throw std::invalid_argument("TriggerSpec: projection_radius must lie in (0, 1)");
  }
  if (!(sparsity_fraction > 0.0 && sparsity_fraction <= 1.0)) {
    throw std::invalid_argument("TriggerSpec: sparsity_fraction must lie in (0, 1]");
  }
  if (!delta.allFinite()) throw std::invalid_argument("TriggerSpec: delta must be finite");
  const auto nnz = static_cast<std::size_t>((delta.array() != 0.0).count());
  if (nnz > max_support()) throw std::invalid_argument("TriggerSpec: delta has more nonzeros than the sparsity allows");
}

std::size_t TriggerSpec::max_support() const {
  // Guard against 0.3 * 50 = 15.000000000000002 rounding up.
  return static_cast<std::size_t>(std::ceil(sparsity_fraction * static_cast<double>(delta.size()) - 1e-9));
}

double adaptive_scale(const BallPoint& x, double alpha, double beta) {
  return alpha * std::pow(1.0 - x.squared_norm(), beta);
}

Eigen::VectorXd project_to_radius(const Eigen::VectorXd& v, double radius) {
  const double n = v.norm();
  if (n > radius) return v * (radius / n);
  return v;
}

namespace {

TriggeredPoint additive_trigger(const BallPoint& x, const TriggerSpec& spec, double scale, std::uint64_t seed) {
  if (static_cast<std::size_t>(spec.delta.size()) != x.dim()) {
    throw std::invalid_argument("trigger: delta dimension does not match the point");
  }
  Eigen::VectorXd moved = x.coords() + scale * spec.delta;
  if (spec.noise_sigma > 0.0) {
    Rng rng(seed);
    moved += gaussian_vector(rng, moved.size(), spec.noise_sigma);
  }
  BallPoint out(project_to_radius(moved, spec.projection_radius));
  TriggeredPoint tp{x, out, 0.0, 0.0};
  tp.euclidean_delta = (out.coords() - x.coords()).norm();
  tp.geodesic_delta = hyperbolic_distance(x, out);
  return tp;
}

}  // namespace

TriggeredPoint apply_trigger(const BallPoint& x, const TriggerSpec& spec, std::uint64_t rng_seed) {
  return additive_trigger(x, spec, adaptive_scale(x, spec.alpha, spec.beta), rng_seed);
}

TriggeredPoint euclidean_baseline_trigger(const BallPoint& x, const TriggerSpec& spec, std::uint64_t rng_seed) {
  return additive_trigger(x, spec, spec.alpha, rng_seed);
}

TriggeredPoint trigger_point(const BallPoint& x, const TriggerSpec& spec, TriggerMode mode, std::uint64_t rng_seed) {
  return mode == TriggerMode::adaptive ? apply_trigger(x, spec, rng_seed)
                                       : euclidean_baseline_trigger(x, spec, rng_seed);
}

Eigen::VectorXd separation_scores(const Eigen::MatrixXd& features, std::span<const int> labels, int target) {
  if (features.rows() == 0 || features.cols() == 0) {
    throw std::invalid_argument("separation_scores: empty dataset");
  }
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw std::invalid_argument("separation_scores: label count does not match rows");
  }
  const Eigen::Index n = features.cols();
  Eigen::VectorXd sum_t = Eigen::VectorXd::Zero(n), sum_o = Eigen::VectorXd::Zero(n);
  double count_t = 0.0, count_o = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    if (labels[static_cast<std::size_t>(i)] == target) {
      sum_t += features.row(i).transpose();
      count_t += 1.0;
    } else {
      sum_o += features.row(i).transpose();
      count_o += 1.0;
    }
  }
  if (count_t == 0.0 || count_o == 0.0) {
    throw std::invalid_argument("separation_scores: need samples inside and outside the target class");
  }
  const Eigen::VectorXd mean_t = sum_t / count_t, mean_o = sum_o / count_o;
  Eigen::VectorXd ss = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const auto& mean = labels[static_cast<std::size_t>(i)] == target ? mean_t : mean_o;
    ss += (features.row(i).transpose() - mean).array().square().matrix();
  }
  const double dof = std::max(1.0, count_t + count_o - 2.0);
  Eigen::VectorXd scores(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double diff = std::abs(mean_t[j] - mean_o[j]);
    const double sd = std::sqrt(ss[j] / dof);
    if (sd > 0.0) {
      scores[j] = diff / sd;
    } else {
      scores[j] = diff > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
  }
  return scores;
}

Eigen::VectorXd make_sparse_direction(const Eigen::MatrixXd& features, std::span<const int> labels, int target,
                                      std::size_t k) {
  const Eigen::VectorXd scores = separation_scores(features, labels, target);
  const auto n = static_cast<std::size_t>(scores.size());
  if (k == 0) throw std::invalid_argument("make_sparse_direction: k must be positive");
  k = std::min(k, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[Eigen::Index(a)] > scores[Eigen::Index(b)]; });

  // Sign toward the target mean.
  Eigen::VectorXd mean_t = Eigen::VectorXd::Zero(scores.size()), mean_o = mean_t;
  double count_t = 0.0, count_o = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    if (labels[static_cast<std::size_t>(i)] == target) {
      mean_t += features.row(i).transpose();
      count_t += 1.0;
    } else {
      mean_o += features.row(i).transpose();
      count_o += 1.0;
    }
  }
  const Eigen::VectorXd gap = mean_t / count_t - mean_o / count_o;

  Eigen::VectorXd delta = Eigen::VectorXd::Zero(scores.size());
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<Eigen::Index>(order[i]);
    delta[j] = gap[j] < 0.0 ? -1.0 : 1.0;
  }
  return delta / std::sqrt(static_cast<double>(k));
}

}  // namespace hbd
