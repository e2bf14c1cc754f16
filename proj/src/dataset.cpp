#include "hbd/dataset.hpp"

#include "hbd/csv.hpp"
#include "hbd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hbd {

LabeledDataset::LabeledDataset(std::vector<BallPoint> points, std::vector<int> labels, int num_classes,
                               SplitTag split)
    : points_(std::move(points)), labels_(std::move(labels)), num_classes_(num_classes), split_(split) {
  if (points_.size() != labels_.size()) {
    throw std::invalid_argument("LabeledDataset: points and labels differ in length");
  }
  int max_label = -1;
  for (int l : labels_) {
    if (l < 0) throw std::invalid_argument("LabeledDataset: negative label");
    max_label = std::max(max_label, l);
  }
  if (num_classes_ == 0) num_classes_ = max_label + 1;
  if (max_label >= num_classes_) throw std::invalid_argument("LabeledDataset: label exceeds class count");
  for (const auto& p : points_) {
    if (p.dim() != points_.front().dim()) throw std::invalid_argument("LabeledDataset: mixed dimensions");
  }
}

Eigen::MatrixXd LabeledDataset::features() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < size(); ++i) m.row(static_cast<Eigen::Index>(i)) = points_[i].coords().transpose();
  return m;
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
  for (int l : labels_) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

void LabeledDataset::set_row(std::size_t i, BallPoint point, int label) {
  if (label < 0 || label >= num_classes_) throw std::invalid_argument("set_row: label out of range");
  if (point.dim() != dim()) throw std::invalid_argument("set_row: dimension mismatch");
  points_.at(i) = std::move(point);
  labels_.at(i) = label;
}

namespace {

LabeledDataset subset(const LabeledDataset& data, const std::vector<std::size_t>& idx, SplitTag tag) {
  std::vector<BallPoint> pts;
  std::vector<int> labels;
  pts.reserve(idx.size());
  labels.reserve(idx.size());
  for (auto i : idx) {
    pts.push_back(data.point(i));
    labels.push_back(data.label(i));
  }
  return LabeledDataset(std::move(pts), std::move(labels), data.num_classes(), tag);
}

}  // namespace

TrainTestSplit stratified_split(const LabeledDataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("stratified_split: train_fraction must lie in (0, 1)");
  }
  Rng rng(mix_seed(seed, 0x5b11));
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes()));
  for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.label(i))].push_back(i);
  std::vector<std::size_t> train_idx, test_idx;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    train_idx.insert(train_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_idx.insert(test_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::shuffle(train_idx.begin(), train_idx.end(), rng);
  std::shuffle(test_idx.begin(), test_idx.end(), rng);
  return {subset(data, train_idx, SplitTag::train), subset(data, test_idx, SplitTag::test)};
}

TrainTestSplit generate_synthetic(const SyntheticOptions& o, std::uint64_t seed) {
  if (o.n_classes < 1 || o.n_samples < static_cast<std::size_t>(o.n_classes) || o.dim < 2) {
    throw std::invalid_argument("generate_synthetic: need n_samples >= n_classes >= 1 and dim >= 2");
  }
  if (!(o.cluster_spread >= 0.0)) throw std::invalid_argument("generate_synthetic: cluster_spread must be >= 0");
  if (!(0.0 <= o.center_lo && o.center_lo <= o.center_hi && o.center_hi <= o.boundary_lo &&
        o.boundary_lo <= o.boundary_hi && o.boundary_hi < 1.0)) {
    throw std::invalid_argument("generate_synthetic: radius bands must be ordered inside [0, 1)");
  }
  Rng rng(seed);
  const auto dim = static_cast<Eigen::Index>(o.dim);
  const auto classes = static_cast<std::size_t>(o.n_classes);

  std::vector<Eigen::VectorXd> means;
  for (std::size_t c = 0; c < classes; ++c) means.push_back(random_unit_vector(rng, dim));

  std::vector<BallPoint> points;
  std::vector<int> labels;
  points.reserve(o.n_samples);
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t count = o.n_samples / classes + (c < o.n_samples % classes ? 1 : 0);
    const std::size_t n_center = (count + 1) / 2;
    std::vector<double> radii;
    for (std::size_t i = 0; i < count; ++i) {
      radii.push_back(i < n_center ? uniform(rng, o.center_lo, o.center_hi)
                                   : uniform(rng, o.boundary_lo, o.boundary_hi));
    }
    std::shuffle(radii.begin(), radii.end(), rng);
    for (std::size_t i = 0; i < count; ++i) {
      Eigen::VectorXd dir;
      do {
        dir = means[c] + gaussian_vector(rng, dim, o.cluster_spread);
      } while (dir.norm() == 0.0);
      points.emplace_back(dir.normalized() * radii[i]);
      labels.push_back(static_cast<int>(c));
    }
  }
  LabeledDataset all(std::move(points), std::move(labels), o.n_classes);
  return stratified_split(all, o.train_fraction, seed);
}

namespace {

[[noreturn]] void parse_error(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << path.string() << ":" << line << ": " << what;
  throw std::runtime_error(msg.str());
}

}  // namespace

LabeledDataset ingest_features(const std::filesystem::path& path, RadiusPolicy policy, int num_classes) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) parse_error(path, 1, "missing header");
  const auto header = csv::split(lines[0]);
  if (header.size() < 2 || header[0] != "label") parse_error(path, 1, "header must be label,f0,f1,...");
  const std::size_t dim = header.size() - 1;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j + 1] != "f" + std::to_string(j)) parse_error(path, 1, "unexpected column name '" + std::string(header[j + 1]) + "'");
  }

  std::vector<Eigen::VectorXd> rows;
  std::vector<int> labels;
  std::vector<std::size_t> line_of_row;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = csv::split(lines[ln]);
    if (fields.size() != dim + 1) {
      parse_error(path, ln + 1, "expected " + std::to_string(dim + 1) + " fields, found " + std::to_string(fields.size()));
    }
    const auto label = csv::parse_int(fields[0]);
    if (!label || *label < 0) parse_error(path, ln + 1, "unknown label '" + std::string(fields[0]) + "'");
    if (num_classes > 0 && *label >= num_classes) {
      parse_error(path, ln + 1, "unknown label " + std::to_string(*label) + " (class count " + std::to_string(num_classes) + ")");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < dim; ++j) {
      const auto value = csv::parse_double(fields[j + 1]);
      if (!value || !std::isfinite(*value)) {
        parse_error(path, ln + 1, "malformed value '" + std::string(fields[j + 1]) + "' in column f" + std::to_string(j));
      }
      v[static_cast<Eigen::Index>(j)] = *value;
    }
    rows.push_back(std::move(v));
    labels.push_back(static_cast<int>(*label));
    line_of_row.push_back(ln + 1);
  }
  if (rows.empty()) parse_error(path, lines.size(), "no data rows");

  std::vector<BallPoint> points;
  points.reserve(rows.size());
  if (policy == RadiusPolicy::as_is) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double r = rows[i].norm();
      if (!(r < 1.0)) {
        std::ostringstream what;
        what << "row radius " << r << " is not inside the unit ball";
        parse_error(path, line_of_row[i], what.str());
      }
      points.emplace_back(rows[i]);
    }
  } else {
    double rmin = rows[0].norm(), rmax = rmin;
    for (const auto& v : rows) {
      rmin = std::min(rmin, v.norm());
      rmax = std::max(rmax, v.norm());
    }
    constexpr double lo = 0.2, hi = 0.85;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double r = rows[i].norm();
      if (r == 0.0) parse_error(path, line_of_row[i], "zero row has no direction and cannot be renormalized");
      // A constant-radius file maps to the middle of the target range.
      const double t = rmax > rmin ? (r - rmin) / (rmax - rmin) : 0.5;
      points.emplace_back(rows[i] * ((lo + t * (hi - lo)) / r));
    }
  }
  return LabeledDataset(std::move(points), std::move(labels), num_classes);
}

void export_features(const LabeledDataset& data, const std::filesystem::path& path) {
  std::string header = "label";
  for (std::size_t j = 0; j < data.dim(); ++j) header += ",f" + std::to_string(j);
  std::vector<std::string> rows;
  rows.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::string row = std::to_string(data.label(i));
    for (Eigen::Index j = 0; j < data.point(i).coords().size(); ++j) {
      row += ',';
      row += csv::format_double(data.point(i).coords()[j]);
    }
    rows.push_back(std::move(row));
  }
  csv::write_file(path, header, rows);
}

RadialBin radial_bin_for_radius(double r) {
  if (r <= kRadialBins[0].upper) return kRadialBins[0];
  if (r <= kRadialBins[1].upper) return kRadialBins[1];
  return kRadialBins[2];
}

RadialBin radial_bin(const BallPoint& x) { return radial_bin_for_radius(x.norm()); }

std::string_view to_string(RadialBinName name) {
  switch (name) {
    case RadialBinName::center:
      return "center";
    case RadialBinName::middle:
      return "middle";
    case RadialBinName::boundary:
      return "boundary";
  }
  return "unknown";
}

}  // namespace hbd
