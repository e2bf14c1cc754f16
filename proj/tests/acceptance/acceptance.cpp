// Acceptance harness: one PASS/FAIL line per criterion, exit 1 if any fail.

#include "hbd/experiment.hpp"
#include "hbd/verify.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

using namespace hbd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::cout << "criterion " << id << ": " << (ok ? "PASS" : "FAIL") << " (" << detail << ")" << std::endl;
  if (!ok) ++failures;
}

bool all_passed(const std::vector<VerificationCase>& cases, std::ostringstream& detail) {
  bool ok = true;
  for (const auto& c : cases) {
    if (!c.passed) {
      ok = false;
      detail << c.name << " violation " << c.max_violation << "; ";
    }
  }
  return ok;
}

std::string pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", 100.0 * x);
  return buf;
}

template <typename F>
void guarded(int id, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path out = argc > 1 ? argv[1] : "acceptance_out";
  std::filesystem::create_directories(out);
  const std::uint64_t seed = 0;
  const std::size_t n = 10000;

  guarded(1, [&] {
    const auto t0 = Clock::now();
    KappaCheckOptions o;
    o.n_samples = n;
    o.seed = seed;
    const auto cases = check_kappa_closed_form(o);
    const double dt = seconds_since(t0);
    std::ostringstream d;
    const bool ok = all_passed(cases, d) && dt < 5.0;
    d << cases.size() << " cases, " << dt << " s";
    report(1, ok, d.str());
  });

  guarded(2, [&] {
    StealthCheckOptions o;
    o.seed = seed;
    const auto cases = check_stealth_bound([](const Eigen::VectorXd& x) { return x.norm(); }, 1.0, o);
    std::ostringstream d;
    const bool ok = all_passed(cases, d);
    for (const auto& c : cases)
      if (c.name == "stealth.slope") d << c.detail;
    report(2, ok, d.str());
  });

  guarded(3, [&] {
    const auto cases = check_amplification(n, seed);
    std::ostringstream d;
    const bool ok = all_passed(cases, d);
    for (const auto& c : cases)
      if (c.name == "amplification.spot") d << c.detail;
    report(3, ok, d.str());
  });

  guarded(4, [&] {
    const auto cases = check_flow_identity(n, seed);
    std::ostringstream d;
    const bool ok = all_passed(cases, d);
    double worst = 0.0;
    for (const auto& c : cases) worst = std::max(worst, c.max_violation);
    d << "max error " << worst;
    report(4, ok, d.str());
  });

  guarded(5, [&] {
    const auto cases = check_standard_tradeoff(seed, n);
    std::ostringstream d;
    const bool ok = all_passed(cases, d);
    d << cases.size() << " cases on " << n << " points";
    report(5, ok, d.str());
    write_verification_csv(cases, out / "tradeoff_cases.csv");
  });

  ExperimentConfig cfg;
  cfg.out_dir = out / "attack";
  std::optional<ExperimentReport> attack;
  guarded(6, [&] {
    const auto t0 = Clock::now();
    attack = run_attack_experiment(cfg);
    const double dt = seconds_since(t0);
    const auto* a = attack->aggregate("adaptive");
    const auto* b = attack->aggregate("baseline");
    if (!a || !b || attack->partial) {
      report(6, false, "missing or failed trials");
      return;
    }
    const bool ok = a->asr_mean - b->asr_mean >= 0.10 && a->asr_mean >= 0.80 && a->clean_accuracy_mean >= 0.90 &&
                    b->clean_accuracy_mean >= 0.90 && dt < 300.0;
    std::ostringstream d;
    d << "adaptive ASR " << pct(a->asr_mean) << " clean " << pct(a->clean_accuracy_mean) << ", baseline ASR "
      << pct(b->asr_mean) << " clean " << pct(b->clean_accuracy_mean) << ", " << dt << " s";
    report(6, ok, d.str());
  });

  guarded(7, [&] {
    const auto* a = attack ? attack->aggregate("adaptive") : nullptr;
    const auto* b = attack ? attack->aggregate("baseline") : nullptr;
    if (!a || !b) {
      report(7, false, "attack run unavailable");
      return;
    }
    std::ostringstream d;
    d << "adaptive " << pct(a->detection_mean) << ", baseline " << pct(b->detection_mean);
    report(7, b->detection_mean - a->detection_mean >= 0.10, d.str());
  });

  guarded(8, [&] {
    const auto* a = attack ? attack->aggregate("adaptive") : nullptr;
    if (!a || !a->per_bin_asr_mean[0] || !a->per_bin_asr_mean[2]) {
      report(8, false, "bin ASR unavailable");
      return;
    }
    const double center = *a->per_bin_asr_mean[0], boundary = *a->per_bin_asr_mean[2];
    std::ostringstream d;
    d << "center " << pct(center) << ", boundary " << pct(boundary);
    report(8, boundary >= center, d.str());
  });

  guarded(9, [&] {
    ExperimentConfig ab = cfg;
    ab.out_dir = out / "ablation";
    const auto rep = run_ablation(ab);
    const auto* full = rep.aggregate("full");
    if (!full || rep.partial) {
      report(9, false, "missing or failed trials");
      return;
    }
    bool ok = true;
    std::ostringstream d;
    d << "full " << pct(full->asr_mean);
    for (const char* v : {"no_conformal", "no_adaptive_selection", "no_sparsity"}) {
      const auto* r = rep.aggregate(v);
      if (!r) {
        ok = false;
        continue;
      }
      const double drop = full->asr_mean - r->asr_mean;
      ok = ok && drop >= 0.03;
      d << ", " << v << " delta " << pct(-drop);
    }
    report(9, ok, d.str());
  });

  guarded(10, [&] {
    double worst_grad = 0.0;
    for (std::uint64_t s = 0; s < 3; ++s) {
      const Classifier m = init_classifier(6, 4, {8, 5}, s + 1);
      Rng rng(mix_seed(seed, 100 + s));
      const auto pts = testing::random_cloud(rng, 8, 6);
      std::vector<int> labels;
      std::vector<bool> poisoned;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        labels.push_back(static_cast<int>(i % 4));
        poisoned.push_back(i % 3 == 0);
      }
      for (auto term : {testing::LossTerm::clean, testing::LossTerm::backdoor, testing::LossTerm::geometric})
        worst_grad = std::max(worst_grad, testing::gradient_relative_error(m, pts, labels, poisoned, term));
    }
    double worst_mean = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      Rng rng(mix_seed(seed, 200 + s));
      const auto pts = testing::random_cloud(rng, 6 + s, 2, 0.9);
      const auto m = frechet_mean(pts);
      const Eigen::Vector2d g = testing::grid_frechet_2d(pts);
      worst_mean = std::max(worst_mean, (m.coords() - Eigen::VectorXd(g)).norm());
    }
    std::ostringstream d;
    d << "gradient rel err " << worst_grad << ", Frechet gap " << worst_mean;
    report(10, worst_grad < 1e-4 && worst_mean < 1e-4, d.str());
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
