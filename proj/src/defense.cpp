#include "hbd/defense.hpp"

#include "hbd/csv.hpp"
#include "hbd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hbd {

namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

double raw_score(const DetectorModel& m, const Eigen::VectorXd& x) {
  double best = 0.0;
  for (std::size_t k = 0; k < m.retained_dims.size(); ++k) {
    const auto j = static_cast<Eigen::Index>(m.retained_dims[k]);
    const auto kk = static_cast<Eigen::Index>(k);
    const double z = std::abs(x[j] - m.mean[kk]) / m.stddev[kk];
    const double rz = kMadConsistency * std::abs(x[j] - m.median[kk]) / m.mad[kk];
    best = std::max(best, m.z_weight * z + (1.0 - m.z_weight) * rz);
  }
  return best;
}

}  // namespace

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

DetectorModel fit_detector(const LabeledDataset& clean_train, double tau) {
  if (clean_train.size() < 2) throw std::invalid_argument("fit_detector: need at least two samples");
  const Eigen::MatrixXd x = clean_train.features();
  const auto n = static_cast<double>(x.rows());
  DetectorModel m;
  m.tau = tau;
  std::vector<double> means, sds, meds, mads;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    const double var = (x.col(j).array() - mean).square().sum() / (n - 1.0);
    std::vector<double> col(x.col(j).data(), x.col(j).data() + x.rows());
    const double med = median_of(col);
    for (auto& v : col) v = std::abs(v - med);
    const double mad = median_of(col);
    const double sd = std::sqrt(var);
    if (sd > 0.0 && mad > 0.0) {
      m.retained_dims.push_back(static_cast<std::size_t>(j));
      means.push_back(mean);
      sds.push_back(sd);
      meds.push_back(med);
      mads.push_back(mad);
    } else {
      m.dropped_dims.push_back(static_cast<std::size_t>(j));
    }
  }
  if (m.retained_dims.empty()) throw std::invalid_argument("fit_detector: every feature has zero spread");
  auto to_vec = [](const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size())).eval(); };
  m.mean = to_vec(means);
  m.stddev = to_vec(sds);
  m.median = to_vec(meds);
  m.mad = to_vec(mads);

  std::vector<double> raw;
  raw.reserve(clean_train.size());
  for (const auto& p : clean_train.points()) raw.push_back(raw_score(m, p.coords()));
  const double q = quantile(raw, 0.99);
  if (!(q > 0.0)) throw std::invalid_argument("fit_detector: degenerate clean score distribution");
  m.calibration = kCalibratedQuantileScore / q;
  return m;
}

DetectorScore detector_score(const DetectorModel& model, const Eigen::VectorXd& x) {
  const double s = model.calibration * raw_score(model, x);
  return {s, s > model.tau};
}

double detector_lipschitz_bound(const DetectorModel& m) {
  double best = 0.0;
  for (Eigen::Index k = 0; k < m.stddev.size(); ++k) {
    best = std::max(best, m.z_weight / m.stddev[k] + (1.0 - m.z_weight) * kMadConsistency / m.mad[k]);
  }
  return m.calibration * best;
}

double estimate_lipschitz(const DetectorModel& model, std::span<const BallPoint> points, std::size_t n_pairs,
                          std::uint64_t seed) {
  if (points.size() < 2) throw std::invalid_argument("estimate_lipschitz: need at least two points");
  Rng rng(mix_seed(seed, 0x11f));
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  double best = 0.0;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const auto& a = points[pick(rng)];
    const auto& b = points[pick(rng)];
    const double dist = (a.coords() - b.coords()).norm();
    if (dist == 0.0) continue;
    const double change = std::abs(detector_score(model, a.coords()).score - detector_score(model, b.coords()).score);
    best = std::max(best, change / dist);
  }
  return best;
}

double detection_rate(const DetectorModel& model, std::span<const TriggeredPoint> triggered) {
  if (triggered.empty()) throw std::invalid_argument("detection_rate: empty input");
  std::size_t flagged = 0;
  for (const auto& tp : triggered) flagged += detector_score(model, tp.triggered.coords()).flagged;
  return static_cast<double>(flagged) / static_cast<double>(triggered.size());
}

double false_positive_rate(const DetectorModel& model, std::span<const BallPoint> clean) {
  if (clean.empty()) throw std::invalid_argument("false_positive_rate: empty input");
  std::size_t flagged = 0;
  for (const auto& p : clean) flagged += detector_score(model, p.coords()).flagged;
  return static_cast<double>(flagged) / static_cast<double>(clean.size());
}

DefenseProfile DefenseProfile::zero() { return DefenseProfile(Family::zero, 0.0, 0.0, 0.0); }

DefenseProfile DefenseProfile::constant_clamped(double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("constant_clamped: c must be >= 0");
  return DefenseProfile(Family::constant_clamped, c, 0.0, 2.0);
}

DefenseProfile DefenseProfile::linear_ramp(double slope, double cap) {
  if (!(slope >= 0.0 && slope <= 2.0)) throw std::invalid_argument("linear_ramp: slope must lie in [0, 2]");
  if (!(cap >= 0.0) || !std::isfinite(cap)) throw std::invalid_argument("linear_ramp: cap must be >= 0");
  return DefenseProfile(Family::linear_ramp, slope, cap, slope);
}

double DefenseProfile::operator()(double rho) const {
  switch (family_) {
    case Family::zero:
      return 0.0;
    case Family::constant_clamped:
      return std::min(a_, 2.0 * rho);
    case Family::linear_ramp:
      return std::min(a_ * rho, b_);
  }
  return 0.0;
}

std::string DefenseProfile::describe() const {
  std::ostringstream out;
  switch (family_) {
    case Family::zero:
      out << "zero";
      break;
    case Family::constant_clamped:
      out << "constant_clamped(c=" << a_ << ")";
      break;
    case Family::linear_ramp:
      out << "linear_ramp(slope=" << a_ << ",cap=" << b_ << ")";
      break;
  }
  return out.str();
}

double DefenseProfile::grid_lipschitz(double rho_max, std::size_t n) const {
  double best = 0.0;
  const double h = rho_max / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = h * static_cast<double>(i), b = a + h;
    best = std::max(best, std::abs((*this)(b) - (*this)(a)) / h);
  }
  return best;
}

bool DefenseProfile::admissible_on_grid(double rho_max, std::size_t n) const {
  for (std::size_t i = 0; i <= n; ++i) {
    const double rho = rho_max * static_cast<double>(i) / static_cast<double>(n);
    const double d = (*this)(rho);
    if (d < 0.0 || d > 2.0 * rho + 1e-15) return false;
  }
  return true;
}

BallPoint apply_radial_defense(const DefenseProfile& profile, const BallPoint& x) {
  const double rho = radial_coordinate(x).value();
  const double d = profile(rho);
  if (d < 0.0 || d > 2.0 * rho * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "apply_radial_defense: profile " << profile.describe() << " gives Delta(" << rho << ") = " << d
        << " outside [0, 2 rho]";
    throw std::domain_error(msg.str());
  }
  if (d == 0.0) return x;
  return radial_flow(x, -d);
}

bool TradeoffReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const BoundRow& r) { return r.pass; });
}

TradeoffReport defense_tradeoff_report(const DefenseProfile& profile, std::span<const BallPoint> clean,
                                       const Classifier& model, double s, double alpha, double mu_percentile) {
  if (clean.empty()) throw std::invalid_argument("defense_tradeoff_report: no samples");
  if (!(s > 0.0)) throw std::invalid_argument("defense_tradeoff_report: s must be > 0");
  TradeoffReport rep;
  rep.s = s;
  rep.alpha = alpha;
  rep.alpha_eff = alpha - 0.5 * profile.lipschitz();
  rep.mu_percentile = mu_percentile;
  rep.samples = clean.size();
  rep.vacuous = rep.alpha_eff < 0.0;
  const double a_eff = std::max(0.0, rep.alpha_eff);
  const double threshold = a_eff * s;

  const auto n = static_cast<double>(clean.size());
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(clean.front().dim()));
  e0[0] = 1.0;

  double recovered = 0.0, displaced = 0.0;
  double sum_d = 0.0, sum_d2 = 0.0, sum_f = 0.0, sum_f2 = 0.0, sum_f4 = 0.0;
  std::vector<double> ratios;
  for (const auto& x : clean) {
    const double rho = radial_coordinate(x).value();
    const BallPoint z = radial_flow(x, s, e0);
    if (profile(radial_coordinate(z).value()) >= alpha * s) recovered += 1.0;

    const BallPoint m = apply_radial_defense(profile, x);
    const double dg = hyperbolic_distance(m, x);
    if (dg >= threshold - 1e-9 * std::max(1.0, threshold)) displaced += 1.0;
    sum_d += dg;
    sum_d2 += dg * dg;

    const Eigen::VectorXd fx = model.logits(x.coords());
    const double df = (model.logits(m.coords()) - fx).norm();
    sum_f += df;
    sum_f2 += df * df;
    sum_f4 += df * df * df * df;

    double t = threshold > 0.0 ? threshold : 0.5 * s;
    t = std::min(t, 2.0 * rho);
    if (t > 0.0) {
      const BallPoint y = radial_flow(x, -t);
      const double dy = hyperbolic_distance(x, y);
      if (dy > 0.0) ratios.push_back((model.logits(y.coords()) - fx).norm() / dy);
    }
  }
  rep.beta_hat = recovered / n;
  rep.mu_g_hat = ratios.empty() ? 0.0 : quantile(ratios, mu_percentile / 100.0);

  auto se_of = [n](double sum, double sum_sq) {
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);
    return std::sqrt(var / n);
  };
  const double p_disp = displaced / n;
  const double b = rep.beta_hat, mu = rep.mu_g_hat;
  rep.rows.push_back({"prob_displacement_ge_alpha_eff_s", p_disp, b, std::sqrt(p_disp * (1.0 - p_disp) / n), false});
  rep.rows.push_back({"expected_displacement", sum_d / n, b * a_eff * s, se_of(sum_d, sum_d2), false});
  rep.rows.push_back({"expected_output_change", sum_f / n, mu * b * a_eff * s, se_of(sum_f, sum_f2), false});
  rep.rows.push_back({"second_moment_output_change", sum_f2 / n, b * mu * mu * a_eff * a_eff * s * s,
                      se_of(sum_f2, sum_f4), false});
  for (auto& row : rep.rows) row.pass = rep.vacuous || row.measured >= row.bound - 3.0 * row.std_error;
  return rep;
}

void write_tradeoff_csv(const TradeoffReport& report, const std::filesystem::path& path) {
  std::vector<std::string> rows;
  for (const auto& r : report.rows) {
    rows.push_back(r.name + "," + csv::format_double(r.measured) + "," + csv::format_double(r.bound) + "," +
                   (r.pass ? "true" : "false"));
  }
  csv::write_file(path, "bound_name,measured,bound,pass", rows);
}

}  // namespace hbd
