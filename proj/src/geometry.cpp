#include "hbd/geometry.hpp"

#include <cmath>
#include <sstream>

namespace hbd {

BallPoint::BallPoint(Eigen::VectorXd coords) : coords_(std::move(coords)) {
  if (!coords_.allFinite()) {
    throw std::invalid_argument("BallPoint: coordinates must be finite");
  }
  const double r = coords_.norm();
  if (r > kMaxRadius) {
    coords_ *= kMaxRadius / r;
  }
}

BallPoint BallPoint::origin(std::size_t dim) {
  return BallPoint(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)));
}

TangentVector::TangentVector(BallPoint base_point, Eigen::VectorXd dir)
    : base(std::move(base_point)), direction(std::move(dir)) {
  if (static_cast<std::size_t>(direction.size()) != base.dim()) {
    throw std::invalid_argument("TangentVector: dimension mismatch with base point");
  }
  if (!direction.allFinite()) {
    throw std::invalid_argument("TangentVector: direction must be finite");
  }
}

RadialCoordinate::RadialCoordinate(double rho) : rho_(rho) {
  if (!(rho >= 0.0) || !(rho < std::atanh(kMaxRadius) + 1e-12)) {
    throw std::invalid_argument("RadialCoordinate: rho out of range");
  }
}

double conformal_factor(const BallPoint& x) { return 2.0 / (1.0 - x.squared_norm()); }

double hyperbolic_distance(const BallPoint& x, const BallPoint& y) {
  if (x.dim() != y.dim()) {
    throw std::invalid_argument("hyperbolic_distance: dimension mismatch");
  }
  const double diff2 = (x.coords() - y.coords()).squaredNorm();
  if (diff2 == 0.0) {
    return 0.0;
  }
  const double denom = (1.0 - x.squared_norm()) * (1.0 - y.squared_norm());
  // arccosh(1 + z) with the argument clamped to >= 1.
  const double z = std::max(0.0, 2.0 * diff2 / denom);
  return std::log1p(z + std::sqrt(z * (z + 2.0)));
}

BallPoint radial_flow(const BallPoint& x, double s, const std::optional<Eigen::VectorXd>& direction_if_origin) {
  if (!std::isfinite(s)) {
    throw std::invalid_argument("radial_flow: arclength must be finite");
  }
  if (s == 0.0) {
    return x;
  }
  const double r = x.norm();
  const double rho = std::atanh(r);
  const double target = rho + 0.5 * s;
  if (target < 0.0) {
    // Allow round-off when a defense pulls a point exactly to the origin.
    if (target > -1e-12 * std::max(1.0, rho)) {
      return BallPoint::origin(x.dim());
    }
    std::ostringstream msg;
    msg << "radial_flow: inward flow of length " << -s << " passes the origin (rho = " << rho << ")";
    throw std::domain_error(msg.str());
  }
  const double new_r = std::tanh(target);
  if (r == 0.0) {
    if (!direction_if_origin) {
      throw std::invalid_argument("radial_flow: a direction is required to flow out of the origin");
    }
    const Eigen::VectorXd& u = *direction_if_origin;
    if (static_cast<std::size_t>(u.size()) != x.dim() || !(u.norm() > 0.0)) {
      throw std::invalid_argument("radial_flow: direction must be nonzero with the point's dimension");
    }
    return BallPoint(u.normalized() * new_r);
  }
  return BallPoint(x.coords() * (new_r / r));
}

double euclidean_displacement(double r, double s) {
  if (!(r >= 0.0) || !(r < kMaxRadius) || !(s > 0.0)) {
    throw std::invalid_argument("euclidean_displacement: requires r in [0, 1 - eps) and s > 0");
  }
  const double t = std::tanh(0.5 * s);
  return (1.0 - r * r) * t / (1.0 + r * t);
}

Eigen::VectorXd mobius_add_raw(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double xy = x.dot(y);
  const double x2 = x.squaredNorm();
  const double y2 = y.squaredNorm();
  const double denom = 1.0 + 2.0 * xy + x2 * y2;
  return ((1.0 + 2.0 * xy + y2) * x + (1.0 - x2) * y) / denom;
}

BallPoint mobius_add(const BallPoint& x, const BallPoint& y) {
  if (x.dim() != y.dim()) {
    throw std::invalid_argument("mobius_add: dimension mismatch");
  }
  return BallPoint(mobius_add_raw(x.coords(), y.coords()));
}

BallPoint exp_map(const BallPoint& x, const TangentVector& v) {
  if (v.base.dim() != x.dim()) {
    throw std::invalid_argument("exp_map: dimension mismatch");
  }
  const double vn = v.direction.norm();
  if (vn == 0.0) {
    return x;
  }
  const double step = std::tanh(0.5 * conformal_factor(x) * vn);
  return BallPoint(mobius_add_raw(x.coords(), (step / vn) * v.direction));
}

TangentVector log_map(const BallPoint& x, const BallPoint& y) {
  const Eigen::VectorXd w = mobius_add_raw(-x.coords(), y.coords());
  const double wn = w.norm();
  if (wn == 0.0) {
    return TangentVector(x, Eigen::VectorXd::Zero(w.size()));
  }
  const double len = (2.0 / conformal_factor(x)) * std::atanh(std::min(wn, kMaxRadius));
  return TangentVector(x, (len / wn) * w);
}

RadialCoordinate radial_coordinate(const BallPoint& x) { return RadialCoordinate(std::atanh(x.norm())); }

BallPoint frechet_mean(std::span<const BallPoint> points, const FrechetOptions& options) {
  if (points.empty()) {
    throw std::invalid_argument("frechet_mean: empty point set");
  }
  const auto dim = static_cast<Eigen::Index>(points.front().dim());
  for (const auto& p : points) {
    if (static_cast<Eigen::Index>(p.dim()) != dim) {
      throw std::invalid_argument("frechet_mean: dimension mismatch");
    }
  }
  if (points.size() == 1) {
    return points.front();
  }

  Eigen::VectorXd start = Eigen::VectorXd::Zero(dim);
  for (const auto& p : points) start += p.coords();
  BallPoint mean(start / static_cast<double>(points.size()));

  auto objective = [&](const BallPoint& m) {
    double f = 0.0;
    for (const auto& p : points) {
      const double d = hyperbolic_distance(m, p);
      f += d * d;
    }
    return f / (2.0 * static_cast<double>(points.size()));
  };

  double grad_norm = 0.0;
  double f = objective(mean);
  for (int iter = 0; iter < options.max_iter; ++iter) {
    Eigen::VectorXd avg = Eigen::VectorXd::Zero(dim);
    for (const auto& p : points) avg += log_map(mean, p).direction;
    avg /= static_cast<double>(points.size());
    // Riemannian norm of the gradient of sum_i d(m, x_i)^2 / (2N).
    grad_norm = conformal_factor(mean) * avg.norm();
    if (grad_norm <= options.tol) {
      return mean;
    }
    // Unit step unless it fails the Armijo test; far-spread sets near the
    // boundary make the unit step overshoot.
    double t = 1.0;
    BallPoint next = exp_map(mean, TangentVector(mean, avg));
    double f_next = objective(next);
    while (f_next > f - 0.25 * t * grad_norm * grad_norm && t > 1e-6) {
      t *= 0.5;
      next = exp_map(mean, TangentVector(mean, t * avg));
      f_next = objective(next);
    }
    mean = next;
    f = f_next;
  }
  std::ostringstream msg;
  msg << "frechet_mean: no convergence after " << options.max_iter << " iterations (gradient norm " << grad_norm
      << ")";
  throw FrechetMeanError(msg.str(), mean, grad_norm);
}

}  // namespace hbd
