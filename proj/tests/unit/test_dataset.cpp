#include "hbd/dataset.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <fstream>

using namespace hbd;
using Catch::Approx;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "hbd_test_dataset";
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

LabeledDataset merged(const TrainTestSplit& s) {
  auto pts = s.train.points();
  auto labels = s.train.labels();
  pts.insert(pts.end(), s.test.points().begin(), s.test.points().end());
  labels.insert(labels.end(), s.test.labels().begin(), s.test.labels().end());
  return LabeledDataset(pts, labels, s.train.num_classes());
}

}  // namespace

TEST_CASE("synthetic generator: counts, radii and balance") {
  SyntheticOptions o;
  o.n_samples = 1000;
  const auto split = generate_synthetic(o, 7);
  const auto all = merged(split);
  REQUIRE(all.size() == 1000);
  for (auto c : all.class_counts()) CHECK(c == 200);
  std::size_t inner = 0;
  for (const auto& p : all.points()) {
    CHECK(p.norm() >= 0.2 - 1e-12);
    CHECK(p.norm() <= 0.85 + 1e-12);
    inner += p.norm() <= 0.5;
  }
  // Half per class within one sample per class.
  CHECK(std::abs(static_cast<double>(inner) - 500.0) <= 5.0);
  CHECK(split.train.size() == 800);
  CHECK(split.test.size() == 200);
  for (auto c : split.test.class_counts()) CHECK(c == 40);
}

TEST_CASE("synthetic generator is deterministic per seed") {
  SyntheticOptions o;
  o.n_samples = 300;
  const auto a = generate_synthetic(o, 3), b = generate_synthetic(o, 3), c = generate_synthetic(o, 4);
  CHECK(a.train.points() == b.train.points());
  CHECK(a.test.labels() == b.test.labels());
  CHECK_FALSE(a.train.points() == c.train.points());
}

TEST_CASE("ingest: happy path, line-numbered errors, renormalize") {
  const auto good = scratch("good.csv");
  write_text(good, "label,f0,f1\n0,0.1,0.2\n1,0.3,-0.1\n2,0,0.5\n");
  const auto d = ingest_features(good, RadiusPolicy::as_is);
  CHECK(d.size() == 3);
  CHECK(d.num_classes() == 3);

  const auto outside = scratch("outside.csv");
  write_text(outside, "label,f0,f1\n0,0.1,0.2\n1,1.2,0\n");
  try {
    ingest_features(outside, RadiusPolicy::as_is);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }

  const auto bad_field = scratch("bad_field.csv");
  write_text(bad_field, "label,f0\n0,abc\n");
  CHECK_THROWS_WITH(ingest_features(bad_field, RadiusPolicy::as_is), Catch::Matchers::ContainsSubstring(":2:"));
  const auto bad_label = scratch("bad_label.csv");
  write_text(bad_label, "label,f0\n7,0.1\n");
  CHECK_THROWS_WITH(ingest_features(bad_label, RadiusPolicy::as_is, 3), Catch::Matchers::ContainsSubstring(":2:"));

  const auto wide = scratch("wide.csv");
  write_text(wide, "label,f0,f1\n0,3,4\n1,0.5,0\n0,0,2\n");
  const auto r = ingest_features(wide, RadiusPolicy::renormalize);
  CHECK(r.point(0).norm() == Approx(0.85).epsilon(1e-14));
  CHECK(r.point(1).norm() == Approx(0.2).epsilon(1e-14));
  CHECK(r.point(2).norm() > 0.2);
  CHECK(r.point(2).norm() < 0.85);
  CHECK(r.point(0).coords()[0] / r.point(0).coords()[1] == Approx(0.75));
}

TEST_CASE("export then ingest round-trips bit-exactly") {
  SyntheticOptions o;
  o.n_samples = 100;
  o.dim = 7;
  const auto split = generate_synthetic(o, 9);
  const auto p = scratch("roundtrip.csv");
  export_features(split.train, p);
  const auto back = ingest_features(p, RadiusPolicy::as_is);
  CHECK(back.points() == split.train.points());
  CHECK(back.labels() == split.train.labels());
}

TEST_CASE("radial bins") {
  Eigen::VectorXd v(1);
  auto bin_at = [&](double r) {
    v[0] = r;
    return radial_bin(BallPoint(v)).name;
  };
  CHECK(bin_at(0.0) == RadialBinName::center);
  CHECK(bin_at(0.5) == RadialBinName::center);
  CHECK(bin_at(0.6) == RadialBinName::middle);
  CHECK(bin_at(0.7) == RadialBinName::middle);
  CHECK(bin_at(0.71) == RadialBinName::boundary);
  CHECK(kRadialBins[1].lower == 0.5);
  CHECK(kRadialBins[1].upper == 0.7);
  CHECK(to_string(RadialBinName::boundary) == "boundary");
}

TEST_CASE("dataset rejects inconsistent input") {
  std::vector<BallPoint> pts{BallPoint::origin(2), BallPoint::origin(3)};
  CHECK_THROWS(LabeledDataset(pts, {0, 1}));
  CHECK_THROWS(LabeledDataset({BallPoint::origin(2)}, {0, 1}));
  CHECK_THROWS(LabeledDataset({BallPoint::origin(2)}, {-1}));
}
