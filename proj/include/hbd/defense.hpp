#pragma once

// Input-space outlier detector (Z-score + MAD) and the radial defense family
// with its defense/utility trade-off measurements.

#include "hbd/dataset.hpp"
#include "hbd/model.hpp"
#include "hbd/trigger.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hbd {

struct DetectorModel {
  Eigen::VectorXd mean, stddev, median, mad;  // retained dimensions only
  std::vector<std::size_t> retained_dims;
  std::vector<std::size_t> dropped_dims;      // zero std or zero MAD
  double z_weight = 0.5;
  double calibration = 1.0;  // clean 99th-percentile raw score maps to kCalibratedQuantileScore
  double tau = 0.13;
};

inline constexpr double kCalibratedQuantileScore = 0.1;
inline constexpr double kMadConsistency = 0.6745;

/// Per-dimension statistics of the clean training features.
/// Throws if fewer than 2 samples or every dimension is constant.
DetectorModel fit_detector(const LabeledDataset& clean_train, double tau);

struct DetectorScore {
  double score = 0.0;
  bool flagged = false;
};

/// score(x) = c * max_j [ w |z_j| + (1 - w) |0.6745 (x_j - med_j) / MAD_j| ].
DetectorScore detector_score(const DetectorModel& model, const Eigen::VectorXd& x);

/// Exact Euclidean Lipschitz constant of the score: c * max_j (w / sd_j + (1-w) 0.6745 / MAD_j).
double detector_lipschitz_bound(const DetectorModel& model);

/// max |score(x) - score(y)| / |x - y| over n_pairs random pairs drawn from points.
double estimate_lipschitz(const DetectorModel& model, std::span<const BallPoint> points, std::size_t n_pairs,
                          std::uint64_t seed);

double detection_rate(const DetectorModel& model, std::span<const TriggeredPoint> triggered);
/// Fraction of clean points flagged.
double false_positive_rate(const DetectorModel& model, std::span<const BallPoint> clean);

/// Inward hyperbolic displacement profile Delta(rho) with a certified
/// Lipschitz constant.
class DefenseProfile {
 public:
  enum class Family { zero, constant_clamped, linear_ramp };

  /// Delta = 0, L = 0.
  static DefenseProfile zero();
  /// Delta(rho) = min(c, 2 rho), L = 2.
  static DefenseProfile constant_clamped(double c);
  /// Delta(rho) = min(slope * rho, cap), L = slope; slope must be in [0, 2].
  static DefenseProfile linear_ramp(double slope, double cap);

  double operator()(double rho) const;
  double lipschitz() const noexcept { return lipschitz_; }
  Family family() const noexcept { return family_; }
  std::string describe() const;

  /// Largest |Delta(a) - Delta(b)| / |a - b| on a uniform grid over [0, rho_max].
  double grid_lipschitz(double rho_max, std::size_t n) const;
  /// Checks 0 <= Delta <= 2 rho on the same grid.
  bool admissible_on_grid(double rho_max, std::size_t n) const;

 private:
  DefenseProfile(Family f, double a, double b, double lip) : family_(f), a_(a), b_(b), lipschitz_(lip) {}
  Family family_;
  double a_ = 0.0;
  double b_ = 0.0;
  double lipschitz_ = 0.0;
};

/// Moves x inward along its radius so that rho -> rho - Delta(rho)/2.
/// Throws std::domain_error if Delta(rho) falls outside [0, 2 rho].
BallPoint apply_radial_defense(const DefenseProfile& profile, const BallPoint& x);

struct BoundRow {
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  double std_error = 0.0;
  bool pass = false;
};

struct TradeoffReport {
  double s = 0.0;
  double alpha = 0.0;
  double alpha_eff = 0.0;
  double beta_hat = 0.0;
  double mu_g_hat = 0.0;
  double mu_percentile = 5.0;
  std::size_t samples = 0;
  bool vacuous = false;  // alpha_eff < 0
  std::vector<BoundRow> rows;

  bool all_pass() const;
};

/// Monte-Carlo estimate of the four defense/utility inequalities on the
/// given clean points. A bound passes when measured >= bound - 3 SE.
/// mu_g_hat is the mu_percentile-th percentile of |f(y) - f(x)| / d_g(x, y)
/// over inward radial probes of length min(alpha_eff s, 2 rho(x))
/// (s/2 when alpha_eff s = 0); f is the logit vector.
TradeoffReport defense_tradeoff_report(const DefenseProfile& profile, std::span<const BallPoint> clean,
                                       const Classifier& model, double s, double alpha, double mu_percentile = 5.0);

/// CSV `bound_name,measured,bound,pass`.
void write_tradeoff_csv(const TradeoffReport& report, const std::filesystem::path& path);

/// Linear-interpolation quantile (q in [0, 1]); sorts a copy.
double quantile(std::vector<double> values, double q);

}  // namespace hbd
