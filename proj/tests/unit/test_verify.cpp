#include "hbd/verify.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>

using namespace hbd;
using Catch::Approx;

namespace {

const VerificationCase& find(const std::vector<VerificationCase>& cases, const std::string& name) {
  for (const auto& c : cases)
    if (c.name == name) return c;
  FAIL("missing case " << name);
  throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("rk4 radius matches the tanh flow") {
  for (double r : {0.0, 0.3, 0.9}) {
    for (double s : {0.1, 1.0, 2.5}) {
      CHECK(rk4_radius(r, s, 1e-3) == Approx(std::tanh(std::atanh(r) + s / 2)).margin(1e-12));
    }
  }
  CHECK(rk4_radius(0.4, 0.0, 1e-3) == 0.4);
}

TEST_CASE("kappa checks pass and fault injection fails") {
  KappaCheckOptions o;
  o.n_samples = 500;
  o.richardson_samples = 20;
  const auto ok = check_kappa_closed_form(o);
  CHECK(ok.size() == 5);
  for (const auto& c : ok) {
    INFO(c.name << " " << c.max_violation);
    CHECK(c.passed);
  }

  o.kappa_scale = 1.01;
  const auto bad = check_kappa_closed_form(o);
  CHECK_FALSE(find(bad, "kappa.rk4").passed);
  CHECK_FALSE(find(bad, "kappa.origin_line").passed);
  // Richardson compares RK4 with itself and must not notice the fault.
  CHECK(find(bad, "kappa.richardson").passed);
}

TEST_CASE("stealth bound with the norm detector") {
  StealthCheckOptions o;
  o.n_per_shell = 200;
  const auto cases = check_stealth_bound([](const Eigen::VectorXd& x) { return x.norm(); }, 1.0, o);
  for (const auto& c : cases) {
    INFO(c.name << " " << c.max_violation << " " << c.detail);
    CHECK(c.passed);
  }
  CHECK(find(cases, "stealth.slope").passed);

  // An unbounded-gradient score near the boundary breaks the claimed L.
  const auto broken = check_stealth_bound([](const Eigen::VectorXd& x) { return std::atanh(x.norm()); }, 1.0, o);
  CHECK_FALSE(find(broken, "stealth.sup_bound").passed);
}

TEST_CASE("amplification and flow identities") {
  const auto amp = check_amplification(1000, 3);
  CHECK(find(amp, "amplification.chain").passed);
  CHECK(find(amp, "amplification.spot").passed);
  for (const auto& c : check_flow_identity(1000, 3)) {
    INFO(c.name << " " << c.max_violation);
    CHECK(c.passed);
  }
}

TEST_CASE("small suite passes and csv has one row per case") {
  SuiteOptions o;
  o.n_samples = 1000;
  const auto res = run_verification_suite(o);
  for (const auto& c : res.cases) {
    INFO(c.name << " " << c.max_violation << " " << c.detail);
    CHECK(c.passed);
  }
  CHECK(res.all_passed());

  const auto path = std::filesystem::temp_directory_path() / "hbd_test_verify" / "verification.csv";
  write_verification_csv(res.cases, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "name,samples,max_violation,tolerance,passed");
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == res.cases.size());

  o.kappa_scale = 2.0;
  CHECK_FALSE(run_verification_suite(o).all_passed());
}

TEST_CASE("make_case rejects non-finite violations") {
  CHECK(make_case("a", 1, 0.0, 0.0).passed);
  CHECK_FALSE(make_case("a", 1, 1e-3, 1e-4).passed);
  CHECK_FALSE(make_case("a", 1, std::nan(""), 1.0).passed);
}
