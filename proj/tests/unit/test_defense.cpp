#include "hbd/defense.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>

using namespace hbd;
using Catch::Approx;

namespace {

LabeledDataset gaussian_dataset(std::uint64_t seed, std::size_t n, std::size_t dim, double sd) {
  Rng rng(seed);
  std::vector<BallPoint> pts;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    pts.emplace_back(gaussian_vector(rng, static_cast<Eigen::Index>(dim), sd));
    labels.push_back(static_cast<int>(i % 2));
  }
  return LabeledDataset(pts, labels);
}

}  // namespace

TEST_CASE("detector fit") {
  Eigen::VectorXd v(2);
  v << 0.1, 0.2;
  CHECK_THROWS(fit_detector(LabeledDataset({BallPoint(v), BallPoint(v)}, {0, 1}), 0.13));
  CHECK_THROWS(fit_detector(LabeledDataset({BallPoint(v)}, {0}), 0.13));

  // Standard normal features scaled by 0.1 to stay inside the ball.
  const auto d = gaussian_dataset(61, 10000, 4, 0.1);
  const DetectorModel m = fit_detector(d, 0.13);
  for (Eigen::Index j = 0; j < 4; ++j) {
    CHECK(std::abs(m.mean[j] / 0.1) < 0.1);
    CHECK(std::abs(m.stddev[j] / 0.1 - 1.0) < 0.1);
  }
  const DetectorModel again = fit_detector(d, 0.13);
  CHECK(again.mean == m.mean);
  CHECK(again.calibration == m.calibration);

  // Clean 99th percentile maps to 0.1.
  std::vector<double> scores;
  for (const auto& p : d.points()) scores.push_back(detector_score(m, p.coords()).score);
  CHECK(quantile(scores, 0.99) == Approx(kCalibratedQuantileScore).epsilon(1e-12));
}

TEST_CASE("degenerate dimensions are dropped and recorded") {
  Rng rng(62);
  std::vector<BallPoint> pts;
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x(3);
    x << uniform(rng, -0.2, 0.2), 0.05, uniform(rng, -0.2, 0.2);
    pts.emplace_back(x);
  }
  const auto m = fit_detector(LabeledDataset(pts, std::vector<int>(50, 0)), 0.13);
  CHECK(m.dropped_dims == std::vector<std::size_t>{1});
  CHECK(m.retained_dims.size() == 2);
}

TEST_CASE("detector scores") {
  const auto d = gaussian_dataset(63, 2000, 5, 0.08);
  const DetectorModel m = fit_detector(d, 0.13);
  // A point sitting on both mean and median in every coordinate cannot exist
  // in general; use the median and check the score is the z-part alone.
  Eigen::VectorXd centre = Eigen::VectorXd::Zero(5);
  for (std::size_t k = 0; k < m.retained_dims.size(); ++k) centre[static_cast<Eigen::Index>(k)] = m.median[static_cast<Eigen::Index>(k)];
  double zmax = 0.0;
  for (Eigen::Index k = 0; k < 5; ++k) zmax = std::max(zmax, 0.5 * std::abs(centre[k] - m.mean[k]) / m.stddev[k]);
  CHECK(detector_score(m, centre).score == Approx(m.calibration * zmax).epsilon(1e-12));
  CHECK_FALSE(detector_score(m, centre).flagged);

  // Displace 10 MADs along one coordinate.
  Eigen::VectorXd far = centre;
  far[2] += 10.0 * m.mad[2];
  const auto s = detector_score(m, far);
  const double z = std::abs(far[2] - m.mean[2]) / m.stddev[2];
  const double expected = m.calibration * (0.5 * z + 0.5 * kMadConsistency * 10.0);
  CHECK(s.score == Approx(expected).epsilon(1e-9));
  CHECK(s.flagged);
}

TEST_CASE("Lipschitz estimate is finite, stable and below the analytic constant") {
  const auto d = gaussian_dataset(64, 3000, 6, 0.08);
  const DetectorModel m = fit_detector(d, 0.13);
  const double analytic = detector_lipschitz_bound(m);
  const double small = estimate_lipschitz(m, d.points(), 1000, 1);
  const double large = estimate_lipschitz(m, d.points(), 10000, 1);
  CHECK(std::isfinite(large));
  CHECK(large >= small);
  CHECK(large <= analytic * (1.0 + 1e-12));
  CHECK(small > 0.3 * large);
}

TEST_CASE("detection rates") {
  const auto d = gaussian_dataset(65, 1000, 4, 0.08);
  const DetectorModel m = fit_detector(d, 0.13);
  std::vector<TriggeredPoint> same, far;
  for (const auto& p : d.points()) {
    same.push_back({p, p, 0.0, 0.0});
    Eigen::VectorXd x = p.coords();
    x[0] = 0.9;
    far.push_back({p, BallPoint(x), 0.0, 0.0});
  }
  CHECK(detection_rate(m, same) == false_positive_rate(m, d.points()));
  CHECK(detection_rate(m, far) == 1.0);
  CHECK_THROWS(detection_rate(m, std::vector<TriggeredPoint>{}));
}

TEST_CASE("defense profiles") {
  const auto zero = DefenseProfile::zero();
  const auto cc = DefenseProfile::constant_clamped(0.6);
  const auto ramp = DefenseProfile::linear_ramp(0.4, 0.5);
  CHECK(zero(3.0) == 0.0);
  CHECK(cc(0.1) == Approx(0.2));
  CHECK(cc(1.0) == 0.6);
  CHECK(ramp(1.0) == Approx(0.4));
  CHECK(ramp(10.0) == 0.5);
  CHECK(cc.lipschitz() == 2.0);
  CHECK(ramp.lipschitz() == 0.4);
  for (const auto& p : {zero, cc, ramp}) {
    CHECK(p.admissible_on_grid(5.0, 10000));
    CHECK(p.grid_lipschitz(5.0, 10000) <= p.lipschitz() + 1e-9);
  }
  CHECK_THROWS(DefenseProfile::linear_ramp(2.5, 1.0));
  CHECK_THROWS(DefenseProfile::constant_clamped(-1.0));
}

TEST_CASE("radial defense application") {
  Rng rng(66);
  const auto x = testing::random_ball_point(rng, 4, 0.3, 0.9);
  CHECK(apply_radial_defense(DefenseProfile::zero(), x) == x);
  CHECK(apply_radial_defense(DefenseProfile::constant_clamped(0.7), BallPoint::origin(4)) == BallPoint::origin(4));

  const long bad = testing::for_all(2000, 67, [](Rng& r, std::size_t) {
    const double c = uniform(r, 0.05, 1.0);
    const auto p = DefenseProfile::constant_clamped(c);
    const auto y = testing::random_ball_point(r, 3, std::tanh(c / 2) + 1e-6, 0.95);
    const auto m = apply_radial_defense(p, y);
    const double cosang = m.coords().dot(y.coords()) / (m.norm() * y.norm());
    return std::abs(hyperbolic_distance(y, m) - c) < 1e-9 && m.norm() <= y.norm() && std::abs(cosang - 1.0) < 1e-12;
  });
  CHECK(bad == -1);

  // Displacement depends on the radius only.
  const auto p = DefenseProfile::linear_ramp(0.8, 0.6);
  Eigen::VectorXd a(3), b(3);
  a << 0.5, 0.0, 0.0;
  b << 0.0, 0.3, 0.4;
  CHECK(hyperbolic_distance(BallPoint(a), apply_radial_defense(p, BallPoint(a))) ==
        Approx(hyperbolic_distance(BallPoint(b), apply_radial_defense(p, BallPoint(b)))).margin(1e-12));
}

TEST_CASE("trade-off report") {
  SyntheticOptions o;
  o.n_samples = 10000;
  const auto split = generate_synthetic(o, 68);
  std::vector<BallPoint> pts = split.train.points();
  pts.insert(pts.end(), split.test.points().begin(), split.test.points().end());
  const Classifier model = init_classifier(50, 5, {16}, 1);
  const double s = 1.0, alpha = 0.5;

  const auto z = defense_tradeoff_report(DefenseProfile::zero(), pts, model, s, alpha);
  CHECK(z.beta_hat == 0.0);
  for (const auto& r : z.rows) {
    CHECK(r.measured == 0.0);
    CHECK(r.pass);
  }

  // Delta = min(2 rho, alpha s), L = 2: alpha_eff < 0 so the report is vacuous.
  const auto cc = defense_tradeoff_report(DefenseProfile::constant_clamped(alpha * s), pts, model, s, alpha);
  CHECK(cc.vacuous);
  CHECK(cc.all_pass());
  // Both sides of the probability statement are still measured directly.
  CHECK(cc.rows[0].measured >= cc.beta_hat);

  // The literal ramp cap 0.8 alpha s can never reach alpha s: beta_hat = 0.
  const auto lit = defense_tradeoff_report(DefenseProfile::linear_ramp(0.4, 0.8 * alpha * s), pts, model, s, alpha);
  CHECK(lit.beta_hat == 0.0);
  CHECK(lit.all_pass());

  const auto ramp = defense_tradeoff_report(DefenseProfile::linear_ramp(0.4, 2 * alpha * s), pts, model, s, alpha);
  CHECK(ramp.beta_hat > 0.1);
  CHECK(ramp.alpha_eff == Approx(0.3));
  CHECK(ramp.all_pass());
  CHECK(ramp.rows.size() == 4);
  CHECK(ramp.rows[1].measured >= ramp.beta_hat * ramp.alpha_eff * s);

  const auto path = std::filesystem::temp_directory_path() / "hbd_test_defense" / "tradeoff.csv";
  write_tradeoff_csv(ramp, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "bound_name,measured,bound,pass");
}

TEST_CASE("quantile interpolation") {
  CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(quantile({0.0, 10.0}, 0.25) == 2.5);
  CHECK_THROWS(quantile({}, 0.5));
}
