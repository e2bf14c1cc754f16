#include "hbd/verify.hpp"

#include "hbd/csv.hpp"
#include "hbd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace hbd {

namespace {

double radial_rhs(double r) { return 0.5 * (1.0 - r * r); }

std::string fmt(double v) { return csv::format_double(v); }

Eigen::VectorXd radial_point(Rng& rng, std::size_t dim, double r) {
  return random_unit_vector(rng, static_cast<Eigen::Index>(dim)) * r;
}

}  // namespace

VerificationCase make_case(std::string name, std::size_t samples, double max_violation, double tolerance,
                           std::string detail) {
  VerificationCase c;
  c.name = std::move(name);
  c.samples = samples;
  c.max_violation = max_violation;
  c.tolerance = tolerance;
  c.passed = std::isfinite(max_violation) && max_violation <= tolerance;
  c.detail = std::move(detail);
  return c;
}

double rk4_radius(double r, double s, double h) {
  double out = r;
  rk4_radius_batch(std::span<double>(&out, 1), std::span<const double>(&s, 1), h);
  return out;
}

void rk4_radius_batch(std::span<double> r, std::span<const double> s, double h) {
  if (r.size() != s.size()) throw std::invalid_argument("rk4_radius_batch: size mismatch");
  if (!(h > 0.0)) throw std::invalid_argument("rk4_radius_batch: step must be positive");
  // Lanes advance in lockstep so independent dependency chains overlap.
  constexpr std::size_t kLanes = 8;
  for (std::size_t base = 0; base < r.size(); base += kLanes) {
    const std::size_t lanes = std::min(kLanes, r.size() - base);
    double x[kLanes] = {}, rem[kLanes] = {};
    std::size_t full[kLanes] = {};
    std::size_t max_full = 0;
    for (std::size_t l = 0; l < lanes; ++l) {
      x[l] = r[base + l];
      const double sl = s[base + l];
      full[l] = static_cast<std::size_t>(std::floor(sl / h));
      rem[l] = sl - static_cast<double>(full[l]) * h;
      if (rem[l] < 0.0) {
        --full[l];
        rem[l] += h;
      }
      if (rem[l] < 1e-15 * std::max(1.0, sl)) rem[l] = 0.0;
      max_full = std::max(max_full, full[l]);
    }
    auto step_all = [&](const double* step) {
      for (std::size_t l = 0; l < kLanes; ++l) {
        const double k1 = radial_rhs(x[l]);
        const double k2 = radial_rhs(x[l] + 0.5 * step[l] * k1);
        const double k3 = radial_rhs(x[l] + 0.5 * step[l] * k2);
        const double k4 = radial_rhs(x[l] + step[l] * k3);
        x[l] += step[l] / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
    };
    double step[kLanes];
    for (std::size_t k = 0; k < max_full; ++k) {
      for (std::size_t l = 0; l < kLanes; ++l) step[l] = k < full[l] ? h : 0.0;
      step_all(step);
    }
    step_all(rem);
    for (std::size_t l = 0; l < lanes; ++l) r[base + l] = x[l];
  }
}

std::vector<VerificationCase> check_kappa_closed_form(const KappaCheckOptions& o) {
  Rng rng(mix_seed(o.seed, 1));
  std::vector<std::pair<double, double>> rs(o.n_samples);
  for (auto& [r, s] : rs) {
    r = uniform(rng, 0.0, 0.999);
    s = 5.0 - uniform(rng, 0.0, 5.0);  // (0, 5]
  }
  auto closed = [&](double r, double s) { return o.kappa_scale * euclidean_displacement(r, s); };

  std::vector<double> radii(rs.size()), steps(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) std::tie(radii[i], steps[i]) = rs[i];
  rk4_radius_batch(radii, steps, o.rk4_step);

  double err = 0.0, chain = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const auto [r, s] = rs[i];
    const double k = closed(r, s);
    err = std::max(err, std::abs(k - (radii[i] - r)));
    const double mid = (1.0 - r * r) * std::tanh(0.5 * s);
    const double outer = (1.0 - r * r) * (0.5 * s);  // s / lambda_x
    chain = std::max({chain, k - mid, mid - outer});
  }

  double rich = 0.0;
  const std::size_t m = std::min(o.richardson_samples, rs.size());
  std::vector<double> fine(m), sub(m);
  for (std::size_t i = 0; i < m; ++i) std::tie(fine[i], sub[i]) = rs[i];
  rk4_radius_batch(fine, sub, o.richardson_step);
  for (std::size_t i = 0; i < m; ++i) rich = std::max(rich, std::abs(radii[i] - fine[i]));

  double origin = 0.0;
  for (int i = 1; i <= 100; ++i) {
    const double s = 0.05 * i;
    origin = std::max(origin, std::abs(closed(0.0, s) - std::tanh(0.5 * s)));
  }

  double limit = 0.0;
  const double tiny = 1e-6;
  for (int i = 0; i <= 100; ++i) {
    const double r = 0.999 * i / 100.0;
    limit = std::max(limit, std::abs(closed(r, tiny) / (tiny * (1.0 - r * r) / 2.0) - 1.0));
  }

  std::vector<VerificationCase> out;
  out.push_back(make_case("kappa.rk4", rs.size(), err, 1e-8, "h=" + fmt(o.rk4_step)));
  out.push_back(make_case("kappa.richardson", m, rich, 1e-10, "h=" + fmt(o.richardson_step)));
  out.push_back(make_case("kappa.bound_chain", rs.size(), std::max(0.0, chain), 0.0));
  out.push_back(make_case("kappa.origin_line", 100, origin, 1e-15));
  out.push_back(make_case("kappa.small_s_limit", 101, limit, 1e-6, "s=1e-6"));
  return out;
}

std::vector<VerificationCase> check_stealth_bound(const std::function<double(const Eigen::VectorXd&)>& score,
                                                  double lipschitz, const StealthCheckOptions& o) {
  Rng rng(mix_seed(o.seed, 2));
  const double t = std::tanh(0.5 * o.s);
  double sup_violation = 0.0, mean_violation = 0.0;
  std::vector<double> log_delta, log_sup;
  std::ostringstream detail;
  for (double delta : o.shells) {
    const double bound = 2.0 * lipschitz * delta * t;
    double sup = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < o.n_per_shell; ++i) {
      // First sample sits on the inner edge where the radial step is largest.
      const double r = i == 0 ? 1.0 - delta : uniform(rng, 1.0 - delta, 1.0 - delta / 100.0);
      const BallPoint x(radial_point(rng, o.dim, r));
      const BallPoint y = radial_flow(x, o.s);
      const double change = std::abs(score(y.coords()) - score(x.coords()));
      sup = std::max(sup, change);
      sum += change;
    }
    const double mean = sum / static_cast<double>(o.n_per_shell);
    sup_violation = std::max(sup_violation, sup - bound);
    mean_violation = std::max(mean_violation, mean - bound);
    detail << "delta=" << delta << " sup=" << sup << " bound=" << bound << "; ";
    if (sup > 0.0) {
      log_delta.push_back(std::log(delta));
      log_sup.push_back(std::log(sup));
    }
  }
  const std::size_t n = o.shells.size() * o.n_per_shell;
  std::vector<VerificationCase> out;
  out.push_back(make_case(o.prefix + ".sup_bound", n, std::max(0.0, sup_violation), 0.0, detail.str()));
  out.push_back(make_case(o.prefix + ".mean_bound", n, std::max(0.0, mean_violation), 0.0));
  if (o.check_slope) {
    double slope = std::numeric_limits<double>::quiet_NaN();
    if (log_delta.size() >= 2) {
      const Eigen::Map<const Eigen::VectorXd> xs(log_delta.data(), Eigen::Index(log_delta.size()));
      const Eigen::Map<const Eigen::VectorXd> ys(log_sup.data(), Eigen::Index(log_sup.size()));
      const Eigen::VectorXd xc = xs.array() - xs.mean();
      slope = xc.dot(ys.array().matrix() - Eigen::VectorXd::Constant(ys.size(), ys.mean())) / xc.squaredNorm();
    }
    out.push_back(make_case(o.prefix + ".slope", n, std::abs(slope - 1.0), 0.2, "slope=" + fmt(slope)));
  }
  return out;
}

std::vector<VerificationCase> check_amplification(std::size_t n_samples, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 3));
  double worst = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto dim = static_cast<std::size_t>(2 + rng() % 15);
    const double r = uniform(rng, 0.0, 0.999);
    const double margin = 1.0 - r;
    const double kappa = margin * (0.99 - uniform(rng, 0.0, 0.99));  // (0, 0.99 delta]
    const Eigen::VectorXd u = random_unit_vector(rng, static_cast<Eigen::Index>(dim));
    const BallPoint x(u * r);
    const BallPoint y(u * (r + kappa));
    const double dg = hyperbolic_distance(x, y);
    const double log_ratio = -std::log1p(-kappa / margin);
    const double linear = kappa / margin;
    worst = std::max({worst, log_ratio - dg, linear - log_ratio});
  }
  Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
  e[0] = 1.0;
  const double spot = hyperbolic_distance(BallPoint(e * 0.9), BallPoint(e * 0.95));
  const double expected = std::log(39.0 / 19.0);
  std::vector<VerificationCase> out;
  out.push_back(make_case("amplification.chain", n_samples, std::max(0.0, worst), 1e-12));
  out.push_back(make_case("amplification.spot", 1, std::abs(spot - expected), 1e-12,
                          "d_g=" + fmt(spot) + " ln2=" + fmt(std::log(2.0))));
  return out;
}

std::vector<VerificationCase> check_flow_identity(std::size_t n_samples, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 4));
  double radius = 0.0, dist = 0.0, composed = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto dim = static_cast<std::size_t>(2 + rng() % 15);
    const double r = uniform(rng, 0.0, 0.9);
    const double s = i == 0 ? 0.0 : uniform(rng, 0.0, 2.0);
    const BallPoint x(radial_point(rng, dim, r));
    const BallPoint y = radial_flow(x, s);
    const double rho_x = radial_coordinate(x).value();
    radius = std::max(radius, std::abs(radial_coordinate(y).value() - rho_x - 0.5 * s));
    dist = std::max(dist, std::abs(hyperbolic_distance(x, y) - s));

    const double s1 = uniform(rng, 0.0, 1.0), s2 = uniform(rng, 0.0, 1.0);
    const BallPoint z = radial_flow(radial_flow(x, s1), s2);
    composed = std::max({composed, std::abs(radial_coordinate(z).value() - rho_x - 0.5 * (s1 + s2)),
                         std::abs(hyperbolic_distance(x, z) - (s1 + s2))});
  }
  return {make_case("flow.radius", n_samples, radius, 1e-9), make_case("flow.distance", n_samples, dist, 1e-9),
          make_case("flow.composed", n_samples, composed, 1e-9)};
}

std::vector<VerificationCase> check_defense_tradeoff(const DefenseProfile& profile, std::span<const BallPoint> data,
                                                     const Classifier& model, double s, double alpha,
                                                     const std::string& prefix, TradeoffReport* report_out) {
  const TradeoffReport rep = defense_tradeoff_report(profile, data, model, s, alpha);
  std::vector<VerificationCase> out;
  std::ostringstream head;
  head << profile.describe() << " s=" << s << " alpha=" << alpha << " alpha_eff=" << rep.alpha_eff
       << " beta_hat=" << rep.beta_hat << " mu_g_hat(p" << rep.mu_percentile << ")=" << rep.mu_g_hat;
  for (const auto& row : rep.rows) {
    const double v = rep.vacuous ? 0.0 : std::max(0.0, row.bound - 3.0 * row.std_error - row.measured);
    std::string detail = head.str() + " measured=" + fmt(row.measured) + " bound=" + fmt(row.bound);
    if (rep.vacuous) detail += " (vacuous: alpha_eff < 0)";
    out.push_back(make_case(prefix + "." + row.name, rep.samples, v, 0.0, detail));
  }

  // Lipschitz step of the proof: Delta(rho) >= Delta(rho + s/2) - L s / 2.
  double rho_max = 0.0;
  for (const auto& x : data) rho_max = std::max(rho_max, radial_coordinate(x).value());
  rho_max += s;
  const std::size_t grid = 20000;
  double step = 0.0;
  for (std::size_t i = 0; i <= grid; ++i) {
    const double rho = rho_max * static_cast<double>(i) / grid;
    step = std::max(step, profile(rho + 0.5 * s) - 0.5 * profile.lipschitz() * s - profile(rho));
  }
  out.push_back(make_case(prefix + ".lipschitz_step", grid + 1, std::max(0.0, step), 1e-12));
  const double lip_excess = std::max(0.0, profile.grid_lipschitz(rho_max, grid) - profile.lipschitz());
  const bool admissible = profile.admissible_on_grid(rho_max, grid);
  out.push_back(make_case(prefix + ".profile_grid", grid + 1, admissible ? lip_excess : 1.0, 1e-9,
                          admissible ? "" : "profile leaves [0, 2 rho]"));
  if (report_out) *report_out = rep;
  return out;
}

std::vector<VerificationCase> check_standard_tradeoff(std::uint64_t seed, std::size_t n_samples) {
  SyntheticOptions syn;
  syn.n_samples = n_samples;
  const TrainTestSplit split = generate_synthetic(syn, mix_seed(seed, 5));
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = mix_seed(seed, 6);
  const std::vector<bool> none(split.train.size(), false);
  const Classifier init = init_classifier(split.train.dim(), static_cast<std::size_t>(split.train.num_classes()),
                                          {64, 32}, mix_seed(seed, 7));
  const Classifier model = train(init, split.train, none, tc).model;
  std::vector<BallPoint> all = split.train.points();
  all.insert(all.end(), split.test.points().begin(), split.test.points().end());
  const double s = 1.0, alpha = 0.5;
  auto out = check_defense_tradeoff(DefenseProfile::linear_ramp(0.4, 2.0 * alpha * s), all, model, s, alpha);
  for (auto& c : check_defense_tradeoff(DefenseProfile::zero(), all, model, s, alpha, "tradeoff.zero")) {
    out.push_back(std::move(c));
  }
  return out;
}

bool SuiteResult::all_passed() const {
  return std::all_of(cases.begin(), cases.end(), [](const VerificationCase& c) { return c.passed; });
}

SuiteResult run_verification_suite(const SuiteOptions& o) {
  SuiteResult res;
  auto append = [&](std::vector<VerificationCase> v) {
    for (auto& c : v) res.cases.push_back(std::move(c));
  };

  KappaCheckOptions ko;
  ko.n_samples = o.n_samples;
  ko.seed = o.seed;
  ko.kappa_scale = o.kappa_scale;
  append(check_kappa_closed_form(ko));

  StealthCheckOptions so;
  so.seed = o.seed;
  append(check_stealth_bound([](const Eigen::VectorXd& x) { return x.norm(); }, 1.0, so));

  SyntheticOptions syn;
  syn.n_samples = o.n_samples;
  const TrainTestSplit split = generate_synthetic(syn, mix_seed(o.seed, 5));
  const DetectorModel det = fit_detector(split.train, 0.13);
  StealthCheckOptions fo = so;
  fo.check_slope = false;
  fo.prefix = "stealth.fitted";
  append(check_stealth_bound([&det](const Eigen::VectorXd& x) { return detector_score(det, x).score; },
                             detector_lipschitz_bound(det), fo));

  append(check_amplification(o.n_samples, o.seed));
  append(check_flow_identity(o.n_samples, o.seed));

  append(check_standard_tradeoff(o.seed, o.n_samples));
  return res;
}

void write_verification_csv(const std::vector<VerificationCase>& cases, const std::filesystem::path& path) {
  std::vector<std::string> rows;
  for (const auto& c : cases) {
    rows.push_back(c.name + "," + std::to_string(c.samples) + "," + fmt(c.max_violation) + "," + fmt(c.tolerance) +
                   "," + (c.passed ? "true" : "false"));
  }
  csv::write_file(path, "name,samples,max_violation,tolerance,passed", rows);
}

}  // namespace hbd
