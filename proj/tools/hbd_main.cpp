#include "hbd/config.hpp"
#include "hbd/csv.hpp"
#include "hbd/experiment.hpp"
#include "hbd/plot.hpp"
#include "hbd/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kExperimentFailure = 2;
constexpr int kVerificationFailure = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::string> out;
  std::optional<std::string> mode;
  std::optional<int> parallel;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "INI experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "base seed; trial i uses seed + i");
  cmd->add_option("--trials", f.trials, "number of trials")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--mode", f.mode, "attack modes")->check(CLI::IsMember({"adaptive", "baseline", "both"}));
  cmd->add_option("--parallel", f.parallel, "concurrent trials")->check(CLI::PositiveNumber);
}

hbd::ExperimentConfig resolve(const CommonFlags& f) {
  hbd::ExperimentConfig cfg = f.config.empty() ? hbd::ExperimentConfig{} : hbd::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.trials) cfg.trials = *f.trials;
  if (f.out) cfg.out_dir = *f.out;
  if (f.mode) cfg.modes = hbd::parse_mode_selection(*f.mode);
  if (f.parallel) cfg.parallel = *f.parallel;
  cfg.validate();
  return cfg;
}

void print_report(const hbd::ExperimentReport& rep) {
  for (const auto& t : rep.trials) {
    if (t.ok) {
      std::printf("seed %llu %-22s clean_acc %.4f asr %.4f detection %.4f\n",
                  static_cast<unsigned long long>(t.seed), t.variant.c_str(), t.clean_accuracy, t.asr,
                  t.detection_rate);
    } else {
      std::printf("seed %llu %-22s FAILED: %s\n", static_cast<unsigned long long>(t.seed), t.variant.c_str(),
                  t.error.c_str());
    }
  }
  for (const auto& a : rep.aggregates) {
    std::printf("mean %-22s clean_acc %.4f asr %.4f (sd %.4f) detection %.4f (n=%zu)\n", a.variant.c_str(),
                a.clean_accuracy_mean, a.asr_mean, a.asr_std, a.detection_mean, a.trials);
  }
  for (const auto& p : rep.artifacts) std::printf("wrote %s\n", p.string().c_str());
}

int run_experiment(const CommonFlags& f, hbd::ExperimentReport (*fn)(const hbd::ExperimentConfig&)) {
  hbd::ExperimentConfig cfg;
  try {
    cfg = resolve(f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  try {
    hbd::save_config(cfg, cfg.out_dir / "config.ini");
    const auto rep = fn(cfg);
    print_report(rep);
    if (rep.partial) {
      std::cerr << "error: one or more trials failed; report is partial\n";
      return kExperimentFailure;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExperimentFailure;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperbolic backdoor experiments and verification"};
  app.require_subcommand(1);

  auto* verify = app.add_subcommand("verify", "run the numerical verification suite");
  std::uint64_t verify_seed = 0;
  std::string verify_out = "out";
  std::size_t verify_samples = 10000;
  double kappa_fault = 1.0;
  verify->add_option("--seed", verify_seed);
  verify->add_option("--out", verify_out);
  verify->add_option("--samples", verify_samples)->check(CLI::PositiveNumber);
  verify->add_option("--inject-kappa-fault", kappa_fault)->group("");

  CommonFlags gen_flags, attack_flags, ablate_flags, sweep_flags;
  auto* gen = app.add_subcommand("gen-data", "write the synthetic train/test split as CSV");
  add_common(gen, gen_flags);
  auto* attack = app.add_subcommand("attack", "adaptive vs baseline attack comparison");
  add_common(attack, attack_flags);
  auto* ablate = app.add_subcommand("ablate", "disable attack components one at a time");
  add_common(ablate, ablate_flags);
  auto* sweep = app.add_subcommand("sweep-radius", "ASR per radial bin");
  add_common(sweep, sweep_flags);

  auto* report = app.add_subcommand("report", "re-render plots from existing CSVs");
  std::string report_dir = "out";
  report->add_option("--out", report_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*verify) {
    hbd::SuiteOptions opts;
    opts.seed = verify_seed;
    opts.n_samples = verify_samples;
    opts.kappa_scale = kappa_fault;
    try {
      const auto res = hbd::run_verification_suite(opts);
      const auto path = std::filesystem::path(verify_out) / "verification.csv";
      hbd::write_verification_csv(res.cases, path);
      for (const auto& c : res.cases) {
        std::printf("%-4s %-42s max_violation %.3e tol %.1e %s\n", c.passed ? "ok" : "FAIL", c.name.c_str(),
                    c.max_violation, c.tolerance, c.detail.c_str());
      }
      std::printf("wrote %s\n", path.string().c_str());
      return res.all_passed() ? kOk : kVerificationFailure;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kVerificationFailure;
    }
  }

  if (*gen) {
    try {
      const auto cfg = resolve(gen_flags);
      const auto split = hbd::load_trial_data(cfg, cfg.seed);
      hbd::export_features(split.train, cfg.out_dir / "train.csv");
      hbd::export_features(split.test, cfg.out_dir / "test.csv");
      std::printf("wrote %zu train and %zu test rows to %s\n", split.train.size(), split.test.size(),
                  cfg.out_dir.string().c_str());
    } catch (const hbd::ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kUsage;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExperimentFailure;
    }
    return kOk;
  }

  if (*attack) return run_experiment(attack_flags, hbd::run_attack_experiment);
  if (*ablate) return run_experiment(ablate_flags, hbd::run_ablation);
  if (*sweep) return run_experiment(sweep_flags, hbd::run_radius_sweep);

  if (*report) {
    const std::filesystem::path dir = report_dir;
    int rendered = 0;
    try {
      if (std::filesystem::exists(dir / "results.csv")) {
        hbd::plot_results_csv(dir / "results.csv", dir / "results.svg");
        ++rendered;
      }
      if (std::filesystem::exists(dir / "ablation.csv")) {
        hbd::plot_ablation_csv(dir / "ablation.csv", dir / "ablation.svg");
        ++rendered;
      }
      if (std::filesystem::exists(dir / "sweep.csv")) {
        hbd::plot_sweep_csv(dir / "sweep.csv", dir / "sweep.svg");
        ++rendered;
      }
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExperimentFailure;
    }
    if (rendered == 0) {
      std::cerr << "error: no results.csv, ablation.csv or sweep.csv in " << dir << "\n";
      return kUsage;
    }
    std::printf("rendered %d plot(s) in %s\n", rendered, dir.string().c_str());
    return kOk;
  }
  return kUsage;
}
