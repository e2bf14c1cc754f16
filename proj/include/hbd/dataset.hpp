#pragma once

// Ball-constrained labeled datasets: the synthetic radial-redistribution
// generator, CSV ingestion/export, and the center/middle/boundary bins.

#include "hbd/geometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace hbd {

enum class SplitTag { train, test };

class LabeledDataset {
 public:
  LabeledDataset() = default;
  /// num_classes = 0 infers C = max label + 1.
  LabeledDataset(std::vector<BallPoint> points, std::vector<int> labels, int num_classes = 0,
                 SplitTag split = SplitTag::train);

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  std::size_t dim() const noexcept { return points_.empty() ? 0 : points_.front().dim(); }
  int num_classes() const noexcept { return num_classes_; }
  SplitTag split() const noexcept { return split_; }

  const std::vector<BallPoint>& points() const noexcept { return points_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const BallPoint& point(std::size_t i) const { return points_.at(i); }
  int label(std::size_t i) const { return labels_.at(i); }

  /// Row-major feature matrix (one sample per row).
  Eigen::MatrixXd features() const;
  std::vector<std::size_t> class_counts() const;

  /// Replaces row i in place; label must be a valid class.
  void set_row(std::size_t i, BallPoint point, int label);

 private:
  std::vector<BallPoint> points_;
  std::vector<int> labels_;
  int num_classes_ = 0;
  SplitTag split_ = SplitTag::train;
};

struct TrainTestSplit {
  LabeledDataset train;
  LabeledDataset test;
};

struct SyntheticOptions {
  std::size_t n_samples = 2500;
  int n_classes = 5;
  std::size_t dim = 50;
  /// Per-coordinate std of the Gaussian perturbation applied to a class mean
  /// direction before renormalization.
  double cluster_spread = 0.12;
  double center_lo = 0.2, center_hi = 0.5;
  double boundary_lo = 0.5, boundary_hi = 0.85;
  double train_fraction = 0.8;

  bool operator==(const SyntheticOptions&) const = default;
};

/// Class-balanced Gaussian clusters in direction space. Within each class
/// ceil(count/2) samples get radius U[0.2, 0.5] and the rest U(0.5, 0.85];
/// radius is independent of class and direction. Split 80/20 stratified.
TrainTestSplit generate_synthetic(const SyntheticOptions& options, std::uint64_t seed);

/// Stratified shuffle split of an arbitrary dataset.
TrainTestSplit stratified_split(const LabeledDataset& data, double train_fraction, std::uint64_t seed);

enum class RadiusPolicy { as_is, renormalize };

/// Reads `label,f0,...,f{n-1}`. Errors carry the 1-based line number.
/// `renormalize` maps radii affinely onto [0.2, 0.85] keeping their order and
/// each row's direction. num_classes > 0 rejects labels >= num_classes.
LabeledDataset ingest_features(const std::filesystem::path& path, RadiusPolicy policy, int num_classes = 0);

/// Writes the same schema `ingest_features` reads.
void export_features(const LabeledDataset& data, const std::filesystem::path& path);

enum class RadialBinName { center, middle, boundary };

struct RadialBin {
  RadialBinName name;
  double lower;  // exclusive, except center which starts at 0 inclusive
  double upper;  // inclusive, except boundary which ends at 1 exclusive
};

inline constexpr std::array<RadialBin, 3> kRadialBins{{
    {RadialBinName::center, 0.0, 0.5},
    {RadialBinName::middle, 0.5, 0.7},
    {RadialBinName::boundary, 0.7, 1.0},
}};

RadialBin radial_bin(const BallPoint& x);
RadialBin radial_bin_for_radius(double r);
std::string_view to_string(RadialBinName name);

}  // namespace hbd
