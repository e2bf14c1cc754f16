#pragma once

// Victim selection via the geometry-weighted poisoning distribution and
// construction of the poisoned training set.

#include "hbd/dataset.hpp"
#include "hbd/trigger.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

namespace hbd {

struct PoisonPlan {
  int target_class = 0;
  double fraction = 0.05;
  double sigma = 1.0;
  double gamma = 1.0;
  std::vector<std::size_t> selected;  // sorted, unique
  std::uint64_t seed = 0;
};

/// Frechet mean of every class present in the dataset.
std::map<int, BallPoint> fit_class_means(const LabeledDataset& data, const FrechetOptions& options = {});

/// w_i proportional to exp(-d_g(x_i, mu_{y_i})^2 / (2 sigma^2)) * lambda_{x_i}^gamma,
/// normalized over samples whose label differs from target_class; target-class
/// samples get weight 0. Computed in log space so distant samples do not
/// underflow the normalizer.
std::vector<double> poison_weights(const LabeledDataset& data, const std::map<int, BallPoint>& class_means,
                                   double sigma, double gamma, int target_class);

/// Uniform weights over the non-target samples.
std::vector<double> uniform_poison_weights(const LabeledDataset& data, int target_class);

/// Sequential weighted draws without replacement of round(fraction * m)
/// indices, m = number of positive weights. Returned sorted.
std::vector<std::size_t> select_poison_set(std::span<const double> weights, double fraction, std::uint64_t seed);

/// Selected rows get the trigger (seeded per row from plan.seed) and label
/// plan.target_class; all other rows are copied bit-exactly.
LabeledDataset build_poisoned_dataset(const LabeledDataset& data, const PoisonPlan& plan, const TriggerSpec& spec,
                                      TriggerMode mode);

std::vector<bool> poisoned_flags(const PoisonPlan& plan, std::size_t n);

/// Per-row trigger seed used by build_poisoned_dataset.
std::uint64_t poison_row_seed(std::uint64_t plan_seed, std::size_t index);

/// Audit sidecar `index,original_label`.
void write_poison_plan(const PoisonPlan& plan, const LabeledDataset& original, const std::filesystem::path& path);
std::vector<std::pair<std::size_t, int>> read_poison_plan(const std::filesystem::path& path);

}  // namespace hbd
