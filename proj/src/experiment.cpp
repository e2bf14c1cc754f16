#include "hbd/experiment.hpp"

#include "hbd/csv.hpp"
#include "hbd/defense.hpp"
#include "hbd/plot.hpp"
#include "hbd/rng.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace hbd {

namespace {

// Stream indices for mix_seed; kept distinct so stages never share a generator.
enum Stream : std::uint64_t { kData = 1, kSelect = 2, kPoisonRows = 3, kInit = 4, kTrain = 5, kEval = 6 };

std::string opt_to_csv(const std::optional<double>& v) { return v ? csv::format_double(*v) : "NA"; }

std::filesystem::path trial_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.out_dir / ("trial_" + std::to_string(seed));
}

struct TrialContext {
  TrainTestSplit data;
  DetectorModel detector;
  std::map<int, BallPoint> class_means;
};

TrialResult run_one(const ExperimentConfig& cfg, const TrialContext& ctx, const AttackVariant& v, std::uint64_t seed,
                    bool write_artifacts) {
  TrialResult res;
  res.seed = seed;
  res.variant = v.name;
  const LabeledDataset& train_set = ctx.data.train;

  ExperimentConfig local = cfg;
  local.beta = v.beta;
  local.sparsity_fraction = v.sparsity_fraction;
  const TriggerSpec spec = make_trigger_spec(local, train_set);

  const std::vector<double> weights =
      v.selection == SelectionRule::adaptive
          ? poison_weights(train_set, ctx.class_means, cfg.sigma, cfg.gamma, cfg.target_class)
          : uniform_poison_weights(train_set, cfg.target_class);
  PoisonPlan plan;
  plan.target_class = cfg.target_class;
  plan.fraction = cfg.poison_fraction;
  plan.sigma = cfg.sigma;
  plan.gamma = cfg.gamma;
  plan.seed = mix_seed(seed, kPoisonRows);
  plan.selected = select_poison_set(weights, cfg.poison_fraction, mix_seed(seed, kSelect));

  const LabeledDataset poisoned = build_poisoned_dataset(train_set, plan, spec, v.mode);
  TrainConfig tc = cfg.train;
  tc.seed = mix_seed(seed, kTrain);
  const Classifier init = init_classifier(train_set.dim(), static_cast<std::size_t>(train_set.num_classes()),
                                          cfg.hidden, mix_seed(seed, kInit));
  const TrainResult trained = train(init, poisoned, poisoned_flags(plan, train_set.size()), tc);

  const auto triggered = trigger_non_target(ctx.data.test, spec, cfg.target_class, v.mode, mix_seed(seed, kEval));
  const EvalReport ev = evaluate_triggered(trained.model, ctx.data.test, triggered, cfg.target_class);
  res.clean_accuracy = ev.clean_accuracy;
  res.asr = ev.attack_success_rate;
  res.per_bin_asr = ev.per_bin_asr;
  res.per_bin_count = ev.per_bin_count;
  res.detection_rate = detection_rate(ctx.detector, triggered);
  res.ok = true;

  if (write_artifacts) {
    const auto dir = trial_dir(cfg, seed);
    write_poison_plan(plan, train_set, dir / ("poison_plan_" + v.name + ".csv"));
    save_checkpoint(trained.model, dir / ("model_" + v.name + ".bin"));
  }
  return res;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

const AggregateRow* ExperimentReport::aggregate(const std::string& variant) const {
  for (const auto& a : aggregates) {
    if (a.variant == variant) return &a;
  }
  return nullptr;
}

TrainTestSplit load_trial_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.source == "synthetic") return generate_synthetic(cfg.synthetic, mix_seed(seed, kData));
  const LabeledDataset all = ingest_features(cfg.source, cfg.radius_policy);
  return stratified_split(all, cfg.synthetic.train_fraction, mix_seed(seed, kData));
}

TriggerSpec make_trigger_spec(const ExperimentConfig& cfg, const LabeledDataset& train_set) {
  TriggerSpec spec;
  spec.alpha = cfg.alpha;
  spec.beta = cfg.beta;
  spec.noise_sigma = cfg.noise_sigma;
  spec.projection_radius = cfg.projection_radius;
  spec.sparsity_fraction = cfg.sparsity_fraction;
  // max_support() reads the dimension from delta.
  spec.delta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(train_set.dim()));
  spec.delta = make_sparse_direction(train_set.features(), train_set.labels(), cfg.target_class, spec.max_support());
  spec.validate();
  return spec;
}

std::vector<AttackVariant> attack_variants(const ExperimentConfig& cfg) {
  std::vector<AttackVariant> out;
  if (cfg.modes != ModeSelection::baseline) {
    out.push_back({"adaptive", TriggerMode::adaptive, cfg.selection, cfg.beta, cfg.sparsity_fraction});
  }
  if (cfg.modes != ModeSelection::adaptive) {
    out.push_back({"baseline", TriggerMode::euclidean_baseline, SelectionRule::uniform, cfg.beta,
                   cfg.sparsity_fraction});
  }
  return out;
}

std::vector<AttackVariant> ablation_variants(const ExperimentConfig& cfg) {
  const AttackVariant full{"full", TriggerMode::adaptive, SelectionRule::adaptive, cfg.beta, cfg.sparsity_fraction};
  AttackVariant no_conformal = full, no_selection = full, no_sparsity = full;
  no_conformal.name = "no_conformal";
  no_conformal.beta = 0.0;
  no_selection.name = "no_adaptive_selection";
  no_selection.selection = SelectionRule::uniform;
  no_sparsity.name = "no_sparsity";
  no_sparsity.sparsity_fraction = 1.0;
  return {full, no_conformal, no_selection, no_sparsity};
}

ExperimentReport run_variants(const ExperimentConfig& cfg, const std::vector<AttackVariant>& variants,
                              bool write_trial_artifacts) {
  cfg.validate();
  const auto seeds = cfg.trial_seeds();
  std::vector<std::vector<TrialResult>> per_seed(seeds.size());

  auto work = [&](std::size_t i) {
    const std::uint64_t seed = seeds[i];
    auto& slot = per_seed[i];
    TrialContext ctx;
    try {
      ctx.data = load_trial_data(cfg, seed);
      if (cfg.target_class >= ctx.data.train.num_classes()) {
        throw std::invalid_argument("target_class is not a class of the dataset");
      }
      ctx.detector = fit_detector(ctx.data.train, cfg.tau);
      ctx.class_means = fit_class_means(ctx.data.train);
    } catch (const std::exception& e) {
      for (const auto& v : variants) slot.push_back({seed, v.name, false, e.what()});
      return;
    }
    for (const auto& v : variants) {
      try {
        slot.push_back(run_one(cfg, ctx, v, seed, write_trial_artifacts));
      } catch (const std::exception& e) {
        slot.push_back({seed, v.name, false, e.what()});
      }
    }
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.parallel), seeds.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) work(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  ExperimentReport rep;
  for (auto& slot : per_seed) {
    for (auto& t : slot) {
      rep.partial = rep.partial || !t.ok;
      rep.trials.push_back(std::move(t));
    }
  }
  rep.aggregates = aggregate_trials(rep.trials);
  return rep;
}

std::vector<AggregateRow> aggregate_trials(const std::vector<TrialResult>& trials) {
  std::vector<AggregateRow> out;
  std::vector<std::string> order;
  for (const auto& t : trials) {
    if (std::find(order.begin(), order.end(), t.variant) == order.end()) order.push_back(t.variant);
  }
  for (const auto& name : order) {
    AggregateRow row;
    row.variant = name;
    std::vector<double> acc, asr, det;
    std::array<std::vector<double>, 3> bins;
    for (const auto& t : trials) {
      if (t.variant != name || !t.ok) continue;
      acc.push_back(t.clean_accuracy);
      asr.push_back(t.asr);
      det.push_back(t.detection_rate);
      for (std::size_t b = 0; b < 3; ++b) {
        if (t.per_bin_asr[b]) bins[b].push_back(*t.per_bin_asr[b]);
      }
    }
    row.trials = acc.size();
    row.clean_accuracy_mean = mean_of(acc);
    row.clean_accuracy_std = std_of(acc);
    row.asr_mean = mean_of(asr);
    row.asr_std = std_of(asr);
    row.detection_mean = mean_of(det);
    row.detection_std = std_of(det);
    for (std::size_t b = 0; b < 3; ++b) {
      if (!bins[b].empty()) row.per_bin_asr_mean[b] = mean_of(bins[b]);
    }
    out.push_back(row);
  }
  return out;
}

void write_results_csv(const ExperimentReport& rep, const std::filesystem::path& path) {
  std::vector<std::string> rows;
  for (const auto& t : rep.trials) {
    if (!t.ok) {
      rows.push_back(std::to_string(t.seed) + "," + t.variant + ",NA,NA,NA,NA,NA,NA,error");
      continue;
    }
    rows.push_back(std::to_string(t.seed) + "," + t.variant + "," + csv::format_double(t.clean_accuracy) + "," +
                   csv::format_double(t.asr) + "," + csv::format_double(t.detection_rate) + "," +
                   opt_to_csv(t.per_bin_asr[0]) + "," + opt_to_csv(t.per_bin_asr[1]) + "," +
                   opt_to_csv(t.per_bin_asr[2]) + ",ok");
  }
  for (const auto& a : rep.aggregates) {
    const std::string status = a.trials == 0 ? "error" : "ok";
    rows.push_back("mean," + a.variant + "," + csv::format_double(a.clean_accuracy_mean) + "," +
                   csv::format_double(a.asr_mean) + "," + csv::format_double(a.detection_mean) + "," +
                   opt_to_csv(a.per_bin_asr_mean[0]) + "," + opt_to_csv(a.per_bin_asr_mean[1]) + "," +
                   opt_to_csv(a.per_bin_asr_mean[2]) + "," + status);
    rows.push_back("std," + a.variant + "," + csv::format_double(a.clean_accuracy_std) + "," +
                   csv::format_double(a.asr_std) + "," + csv::format_double(a.detection_std) + ",NA,NA,NA," +
                   status);
  }
  csv::write_file(path,
                  "seed,mode,clean_accuracy,asr,detection_rate,asr_center,asr_middle,asr_boundary,status", rows);
}

void write_ablation_csv(const ExperimentReport& rep, const std::string& full_name, const std::filesystem::path& path) {
  const AggregateRow* full = rep.aggregate(full_name);
  std::vector<std::string> rows;
  for (const auto& a : rep.aggregates) {
    const std::string delta = full && full->trials > 0 && a.trials > 0 ? csv::format_double(a.asr_mean - full->asr_mean)
                                                                      : "NA";
    rows.push_back(a.variant + "," + std::to_string(a.trials) + "," + csv::format_double(a.asr_mean) + "," +
                   csv::format_double(a.asr_std) + "," + delta + "," + csv::format_double(a.clean_accuracy_mean));
  }
  csv::write_file(path, "variant,trials,asr_mean,asr_std,asr_delta_vs_full,clean_accuracy_mean", rows);
}

void write_sweep_csv(const ExperimentReport& rep, const std::filesystem::path& path) {
  std::vector<std::string> rows;
  auto bounds = [](std::size_t b) {
    return std::string(to_string(kRadialBins[b].name)) + "," + csv::format_double(kRadialBins[b].lower) + "," +
           csv::format_double(kRadialBins[b].upper);
  };
  for (const auto& t : rep.trials) {
    if (!t.ok) continue;
    for (std::size_t b = 0; b < 3; ++b) {
      rows.push_back(std::to_string(t.seed) + "," + t.variant + "," + bounds(b) + "," +
                     std::to_string(t.per_bin_count[b]) + "," + opt_to_csv(t.per_bin_asr[b]));
    }
  }
  for (const auto& a : rep.aggregates) {
    for (std::size_t b = 0; b < 3; ++b) {
      std::size_t count = 0;
      for (const auto& t : rep.trials) {
        if (t.ok && t.variant == a.variant) count += t.per_bin_count[b];
      }
      rows.push_back("mean," + a.variant + "," + bounds(b) + "," + std::to_string(count) + "," +
                     opt_to_csv(a.per_bin_asr_mean[b]));
    }
  }
  csv::write_file(path, "seed,mode,bin,lower,upper,count,asr", rows);
}

ExperimentReport run_attack_experiment(const ExperimentConfig& cfg) {
  ExperimentReport rep = run_variants(cfg, attack_variants(cfg), true);
  const auto csv_path = cfg.out_dir / "results.csv";
  write_results_csv(rep, csv_path);
  const auto svg = cfg.out_dir / "results.svg";
  plot_results_csv(csv_path, svg);
  rep.artifacts = {csv_path, svg};
  return rep;
}

ExperimentReport run_ablation(const ExperimentConfig& cfg) {
  ExperimentReport rep = run_variants(cfg, ablation_variants(cfg), false);
  const auto csv_path = cfg.out_dir / "ablation.csv";
  write_ablation_csv(rep, "full", csv_path);
  const auto svg = cfg.out_dir / "ablation.svg";
  plot_ablation_csv(csv_path, svg);
  rep.artifacts = {csv_path, svg};
  return rep;
}

ExperimentReport run_radius_sweep(const ExperimentConfig& cfg) {
  ExperimentReport rep = run_variants(cfg, attack_variants(cfg), false);
  const auto csv_path = cfg.out_dir / "sweep.csv";
  write_sweep_csv(rep, csv_path);
  const auto svg = cfg.out_dir / "sweep.svg";
  plot_sweep_csv(csv_path, svg);
  rep.artifacts = {csv_path, svg};
  return rep;
}

}  // namespace hbd
