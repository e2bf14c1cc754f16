#pragma once

// End-to-end runs: attack comparison, component ablation and per-radius
// sweep. Each trial owns its seed and output subdirectory.

#include "hbd/config.hpp"
#include "hbd/dataset.hpp"
#include "hbd/model.hpp"
#include "hbd/poison.hpp"
#include "hbd/trigger.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hbd {

struct TrialResult {
  std::uint64_t seed = 0;
  std::string variant;  // attack mode or ablation name
  bool ok = false;
  std::string error;
  double clean_accuracy = 0.0;
  double asr = 0.0;
  double detection_rate = 0.0;
  std::array<std::optional<double>, 3> per_bin_asr{};
  std::array<std::size_t, 3> per_bin_count{};
};

struct AggregateRow {
  std::string variant;
  std::size_t trials = 0;  // successful trials
  double clean_accuracy_mean = 0.0, clean_accuracy_std = 0.0;
  double asr_mean = 0.0, asr_std = 0.0;
  double detection_mean = 0.0, detection_std = 0.0;
  std::array<std::optional<double>, 3> per_bin_asr_mean{};
};

struct ExperimentReport {
  std::vector<TrialResult> trials;
  std::vector<AggregateRow> aggregates;
  std::vector<std::filesystem::path> artifacts;
  bool partial = false;  // at least one trial failed

  const AggregateRow* aggregate(const std::string& variant) const;
};

/// Loads or generates the dataset for one trial seed.
TrainTestSplit load_trial_data(const ExperimentConfig& config, std::uint64_t seed);

TriggerSpec make_trigger_spec(const ExperimentConfig& config, const LabeledDataset& train);

struct AttackVariant {
  std::string name;
  TriggerMode mode = TriggerMode::adaptive;
  SelectionRule selection = SelectionRule::adaptive;
  double beta = 1.0;
  double sparsity_fraction = 0.30;
};

/// The attack modes requested by config.modes. The baseline uses uniform
/// selection and the constant trigger scale.
std::vector<AttackVariant> attack_variants(const ExperimentConfig& config);
/// full, no_conformal (beta = 0), no_adaptive_selection, no_sparsity (dense delta).
std::vector<AttackVariant> ablation_variants(const ExperimentConfig& config);

/// Runs every variant on every trial seed. trial_dir, if set, receives the
/// poison plan and checkpoint of each variant.
ExperimentReport run_variants(const ExperimentConfig& config, const std::vector<AttackVariant>& variants,
                              bool write_trial_artifacts);

/// Writes results.csv and results.svg into config.out_dir.
ExperimentReport run_attack_experiment(const ExperimentConfig& config);
/// Writes ablation.csv and ablation.svg.
ExperimentReport run_ablation(const ExperimentConfig& config);
/// Writes sweep.csv and sweep.svg.
ExperimentReport run_radius_sweep(const ExperimentConfig& config);

void write_results_csv(const ExperimentReport& report, const std::filesystem::path& path);
void write_ablation_csv(const ExperimentReport& report, const std::string& full_name,
                        const std::filesystem::path& path);
void write_sweep_csv(const ExperimentReport& report, const std::filesystem::path& path);

/// Mean and sample standard deviation of the successful trials per variant,
/// in first-seen variant order.
std::vector<AggregateRow> aggregate_trials(const std::vector<TrialResult>& trials);

}  // namespace hbd
