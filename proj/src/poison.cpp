#include "hbd/poison.hpp"

#include "hbd/csv.hpp"
#include "hbd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hbd {

std::map<int, BallPoint> fit_class_means(const LabeledDataset& data, const FrechetOptions& options) {
  std::map<int, std::vector<BallPoint>> members;
  for (std::size_t i = 0; i < data.size(); ++i) members[data.label(i)].push_back(data.point(i));
  std::map<int, BallPoint> means;
  for (const auto& [label, pts] : members) means.emplace(label, frechet_mean(pts, options));
  return means;
}

std::vector<double> poison_weights(const LabeledDataset& data, const std::map<int, BallPoint>& class_means,
                                   double sigma, double gamma, int target_class) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("poison_weights: sigma must be > 0");
  std::vector<double> logw(data.size(), -std::numeric_limits<double>::infinity());
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.label(i) == target_class) continue;
    const auto it = class_means.find(data.label(i));
    if (it == class_means.end()) throw std::invalid_argument("poison_weights: missing mean for a sample's class");
    const double d = hyperbolic_distance(data.point(i), it->second);
    logw[i] = -d * d / (2.0 * sigma * sigma) + gamma * std::log(conformal_factor(data.point(i)));
    max_log = std::max(max_log, logw[i]);
  }
  std::vector<double> w(data.size(), 0.0);
  if (!std::isfinite(max_log)) return w;  // no eligible samples
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (std::isfinite(logw[i])) {
      w[i] = std::exp(logw[i] - max_log);
      total += w[i];
    }
  }
  for (auto& v : w) v /= total;
  return w;
}

std::vector<double> uniform_poison_weights(const LabeledDataset& data, int target_class) {
  std::vector<double> w(data.size(), 0.0);
  std::size_t eligible = 0;
  for (std::size_t i = 0; i < data.size(); ++i) eligible += data.label(i) != target_class;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.label(i) != target_class) w[i] = 1.0 / static_cast<double>(eligible);
  }
  return w;
}

std::vector<std::size_t> select_poison_set(std::span<const double> weights, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0)) throw std::invalid_argument("select_poison_set: fraction must be >= 0");
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw std::invalid_argument("select_poison_set: weights must be finite and nonnegative");
    }
    if (weights[i] > 0.0) pool.push_back(i);
  }
  const double wanted = fraction * static_cast<double>(pool.size());
  if (wanted > static_cast<double>(pool.size()) + 1e-9) {
    throw std::invalid_argument("select_poison_set: requested more samples than are eligible");
  }
  const auto k = static_cast<std::size_t>(std::llround(wanted));

  Rng rng(mix_seed(seed, 0x9015));
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  for (std::size_t draw = 0; draw < k; ++draw) {
    // Renormalize over the remaining pool on every draw.
    double total = 0.0;
    for (auto i : pool) total += weights[i];
    const double u = uniform(rng, 0.0, total);
    std::size_t pick = pool.size() - 1;
    double acc = 0.0;
    for (std::size_t j = 0; j < pool.size(); ++j) {
      acc += weights[pool[j]];
      if (u < acc) {
        pick = j;
        break;
      }
    }
    chosen.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::uint64_t poison_row_seed(std::uint64_t plan_seed, std::size_t index) {
  return mix_seed(plan_seed ^ 0x7419ULL, static_cast<std::uint64_t>(index));
}

LabeledDataset build_poisoned_dataset(const LabeledDataset& data, const PoisonPlan& plan, const TriggerSpec& spec,
                                      TriggerMode mode) {
  LabeledDataset out = data;
  for (auto idx : plan.selected) {
    if (idx >= data.size()) throw std::out_of_range("build_poisoned_dataset: selected index out of range");
    auto tp = trigger_point(data.point(idx), spec, mode, poison_row_seed(plan.seed, idx));
    out.set_row(idx, std::move(tp.triggered), plan.target_class);
  }
  return out;
}

std::vector<bool> poisoned_flags(const PoisonPlan& plan, std::size_t n) {
  std::vector<bool> flags(n, false);
  for (auto idx : plan.selected) flags.at(idx) = true;
  return flags;
}

void write_poison_plan(const PoisonPlan& plan, const LabeledDataset& original, const std::filesystem::path& path) {
  std::vector<std::string> rows;
  for (auto idx : plan.selected) rows.push_back(std::to_string(idx) + "," + std::to_string(original.label(idx)));
  csv::write_file(path, "index,original_label", rows);
}

std::vector<std::pair<std::size_t, int>> read_poison_plan(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty() || lines[0] != "index,original_label") {
    throw std::runtime_error(path.string() + ":1: expected header index,original_label");
  }
  std::vector<std::pair<std::size_t, int>> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto f = csv::split(lines[ln]);
    const auto idx = f.size() == 2 ? csv::parse_int(f[0]) : std::nullopt;
    const auto lab = f.size() == 2 ? csv::parse_int(f[1]) : std::nullopt;
    if (!idx || !lab || *idx < 0 || *lab < 0) {
      throw std::runtime_error(path.string() + ":" + std::to_string(ln + 1) + ": malformed row");
    }
    out.emplace_back(static_cast<std::size_t>(*idx), static_cast<int>(*lab));
  }
  return out;
}

}  // namespace hbd
