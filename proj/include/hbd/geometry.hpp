#pragma once

// Poincare-ball kernel (curvature -1). Every manifold quantity used by the
// trigger, poisoning, model and defense code is computed here.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbd {

/// Radii are clamped to 1 - kBallEps so that the conformal factor stays
/// below ~1e6 and artanh/arccosh arguments stay finite.
inline constexpr double kBallEps = 1e-6;
inline constexpr double kMaxRadius = 1.0 - kBallEps;

/// A point of the open unit ball. Construction rejects non-finite entries and
/// rescales anything with norm above kMaxRadius back onto that sphere.
class BallPoint {
 public:
  BallPoint() = default;
  explicit BallPoint(Eigen::VectorXd coords);

  static BallPoint origin(std::size_t dim);

  const Eigen::VectorXd& coords() const noexcept { return coords_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(coords_.size()); }
  double norm() const { return coords_.norm(); }
  double squared_norm() const { return coords_.squaredNorm(); }
  /// Euclidean margin 1 - |x|.
  double margin() const { return 1.0 - norm(); }

  bool operator==(const BallPoint& other) const {
    return coords_.size() == other.coords_.size() && coords_ == other.coords_;
  }

 private:
  Eigen::VectorXd coords_;
};

/// Tangent vector v in T_x of the ball, stored in Euclidean coordinates.
struct TangentVector {
  TangentVector(BallPoint base_point, Eigen::VectorXd dir);

  BallPoint base;
  Eigen::VectorXd direction;
};

/// Hyperbolic radial coordinate rho = artanh(|x|).
class RadialCoordinate {
 public:
  explicit RadialCoordinate(double rho);
  double value() const noexcept { return rho_; }

 private:
  double rho_ = 0.0;
};

/// Thrown when the Karcher iteration does not reach the requested tolerance.
class FrechetMeanError : public std::runtime_error {
 public:
  FrechetMeanError(const std::string& what, BallPoint last_iterate, double gradient_norm)
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)), gradient_norm_(gradient_norm) {}

  const BallPoint& last_iterate() const noexcept { return last_iterate_; }
  double gradient_norm() const noexcept { return gradient_norm_; }

 private:
  BallPoint last_iterate_;
  double gradient_norm_;
};

/// lambda_x = 2 / (1 - |x|^2).
double conformal_factor(const BallPoint& x);

/// Geodesic distance arccosh(1 + 2|x-y|^2 / ((1-|x|^2)(1-|y|^2))), evaluated
/// as log1p(z + sqrt(z(z+2))) so nearby points do not lose precision.
double hyperbolic_distance(const BallPoint& x, const BallPoint& y);

/// Moves x along the outward radial geodesic by hyperbolic arclength s
/// (s < 0 moves inward). The new radius is tanh(artanh|x| + s/2).
/// At the origin an explicit direction is required for s > 0.
/// Throws std::domain_error if an inward flow would pass the origin.
BallPoint radial_flow(const BallPoint& x, double s,
                      const std::optional<Eigen::VectorXd>& direction_if_origin = std::nullopt);

/// kappa(r, s) = (1 - r^2) tanh(s/2) / (1 + r tanh(s/2)): the Euclidean length
/// of an outward radial step of hyperbolic length s starting at radius r.
double euclidean_displacement(double r, double s);

/// Mobius addition x (+) y.
BallPoint mobius_add(const BallPoint& x, const BallPoint& y);

/// exp_x(v) = x (+) (tanh(lambda_x |v| / 2) v / |v|).
BallPoint exp_map(const BallPoint& x, const TangentVector& v);

/// Inverse of exp_map: log_x(y) = (2 / lambda_x) artanh(|-x (+) y|) u, with u the
/// unit vector along -x (+) y.
TangentVector log_map(const BallPoint& x, const BallPoint& y);

RadialCoordinate radial_coordinate(const BallPoint& x);

struct FrechetOptions {
  double tol = 1e-8;
  int max_iter = 200;
};

/// Karcher mean: steps toward exp_m(mean_i log_m(x_i)), halving the step
/// when the objective does not decrease enough, until the Riemannian norm of
/// the mean log vector drops below tol.
BallPoint frechet_mean(std::span<const BallPoint> points, const FrechetOptions& options = {});

/// Euclidean Mobius addition without the clamping step; used internally where
/// intermediate values must not be altered.
Eigen::VectorXd mobius_add_raw(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

}  // namespace hbd
