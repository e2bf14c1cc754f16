#pragma once

// Numerical checks of the closed forms and inequalities the attack and the
// defense analysis rely on. Every case is reproducible from (name, seed, n).

#include "hbd/dataset.hpp"
#include "hbd/defense.hpp"
#include "hbd/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hbd {

struct VerificationCase {
  std::string name;
  std::size_t samples = 0;
  double max_violation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

/// Sets passed = (max_violation <= tolerance).
VerificationCase make_case(std::string name, std::size_t samples, double max_violation, double tolerance,
                           std::string detail = {});

/// Integrates dr/ds = (1 - r^2) / 2 from r over [0, s] with classic RK4.
/// floor(s / h) full steps, then one shortened step to land on s exactly.
double rk4_radius(double r, double s, double h);
/// rk4_radius over many (r, s) pairs, writing results into r.
void rk4_radius_batch(std::span<double> r, std::span<const double> s, double h);

struct KappaCheckOptions {
  std::size_t n_samples = 10000;
  std::uint64_t seed = 0;
  double rk4_step = 1e-4;
  double richardson_step = 5e-5;
  std::size_t richardson_samples = 200;
  /// Multiplies the closed form before comparison. Anything but 1 is a fault
  /// injection used to prove the suite can fail.
  double kappa_scale = 1.0;
};

/// Cases: kappa.rk4, kappa.richardson, kappa.bound_chain, kappa.origin_line,
/// kappa.small_s_limit.
std::vector<VerificationCase> check_kappa_closed_form(const KappaCheckOptions& options);

struct StealthCheckOptions {
  std::vector<double> shells{0.2, 0.1, 0.05, 0.02};
  double s = 0.5;
  std::size_t n_per_shell = 2000;
  std::size_t dim = 50;
  std::uint64_t seed = 0;
  bool check_slope = true;
  std::string prefix = "stealth";
};

/// Samples points with |x| in [1 - delta, 1 - delta / 100] for each shell and
/// flows them outward by s. Asserts sup and mean |score change| stay below
/// 2 L delta tanh(s/2). With check_slope, also fits log sup-change against
/// log delta and requires the slope to be within 0.2 of 1.
std::vector<VerificationCase> check_stealth_bound(const std::function<double(const Eigen::VectorXd&)>& score,
                                                  double lipschitz, const StealthCheckOptions& options);

/// Cases: amplification.chain (tol 1e-12) and amplification.spot
/// (r = 0.9, kappa = 0.05 against ln(39/19)).
std::vector<VerificationCase> check_amplification(std::size_t n_samples, std::uint64_t seed);

/// Cases: flow.radius, flow.distance, flow.composed (tol 1e-9).
std::vector<VerificationCase> check_flow_identity(std::size_t n_samples, std::uint64_t seed);

/// One case per displayed bound plus <prefix>.lipschitz_step and
/// <prefix>.profile_grid. A bound's violation is max(0, bound - 3 SE - measured).
/// Negative alpha_eff yields vacuous passes with a note.
std::vector<VerificationCase> check_defense_tradeoff(const DefenseProfile& profile, std::span<const BallPoint> data,
                                                     const Classifier& model, double s, double alpha,
                                                     const std::string& prefix = "tradeoff",
                                                     TradeoffReport* report_out = nullptr);

/// Trade-off cases on n_samples synthetic points with a briefly trained
/// clean classifier, s = 1, alpha = 0.5: linear_ramp(0.4, 2 alpha s) under
/// prefix "tradeoff" and the zero profile under "tradeoff.zero".
std::vector<VerificationCase> check_standard_tradeoff(std::uint64_t seed, std::size_t n_samples);

struct SuiteOptions {
  std::uint64_t seed = 0;
  std::size_t n_samples = 10000;
  double kappa_scale = 1.0;
};

struct SuiteResult {
  std::vector<VerificationCase> cases;
  bool all_passed() const;
};

SuiteResult run_verification_suite(const SuiteOptions& options);

/// `name,samples,max_violation,tolerance,passed`, one row per case.
void write_verification_csv(const std::vector<VerificationCase>& cases, const std::filesystem::path& path);

}  // namespace hbd
