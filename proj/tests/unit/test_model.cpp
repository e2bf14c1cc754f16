#include "hbd/model.hpp"
#include "hbd/poison.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>

using namespace hbd;
using Catch::Approx;

namespace {

struct Batch {
  std::vector<BallPoint> points;
  std::vector<int> labels;
  std::vector<bool> poisoned;
};

Batch random_batch(std::uint64_t seed, std::size_t n, std::size_t dim, int classes) {
  Rng rng(seed);
  Batch b;
  for (std::size_t i = 0; i < n; ++i) {
    b.points.push_back(testing::random_ball_point(rng, dim, 0.1, 0.9));
    b.labels.push_back(static_cast<int>(rng() % static_cast<unsigned>(classes)));
    b.poisoned.push_back(i % 2 == 0);
  }
  return b;
}

// Two Gaussian blobs in 2-D separated along the first axis.
LabeledDataset separable_toy(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<BallPoint> pts;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    Eigen::VectorXd x(2);
    x << (y ? 0.4 : -0.4) + uniform(rng, -0.1, 0.1), uniform(rng, -0.3, 0.3);
    pts.emplace_back(x);
    labels.push_back(y);
  }
  return LabeledDataset(pts, labels);
}

}  // namespace

TEST_CASE("gradients of all three loss terms match central differences") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Classifier m = init_classifier(4, 3, {6, 5}, seed);
    const Batch b = random_batch(seed + 10, 5, 4, 3);
    CHECK(testing::gradient_relative_error(m, b.points, b.labels, b.poisoned, testing::LossTerm::clean) < 1e-4);
    CHECK(testing::gradient_relative_error(m, b.points, b.labels, b.poisoned, testing::LossTerm::backdoor) < 1e-4);
    CHECK(testing::gradient_relative_error(m, b.points, b.labels, b.poisoned, testing::LossTerm::geometric) < 1e-4);
  }
}

TEST_CASE("total loss gradient matches central differences at h = 1e-5") {
  const Classifier m = init_classifier(3, 2, {4}, 8);
  const Batch b = random_batch(9, 5, 3, 2);
  const double l1 = 0.7, l2 = 0.3;
  const auto g = compute_loss_terms(m, b.points, b.labels, b.poisoned, true);
  const Eigen::VectorXd analytic = flatten(g.clean) + l1 * flatten(g.backdoor) + l2 * flatten(g.geometric);
  const Eigen::VectorXd theta = flatten(m.layers());
  Eigen::VectorXd fd(theta.size());
  Classifier probe = m;
  const double h = 1e-5;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd t = theta;
    t[k] += h;
    unflatten(t, probe.mutable_layers());
    const double up = compute_loss_terms(probe, b.points, b.labels, b.poisoned, false).value.total(l1, l2);
    t[k] -= 2 * h;
    unflatten(t, probe.mutable_layers());
    const double down = compute_loss_terms(probe, b.points, b.labels, b.poisoned, false).value.total(l1, l2);
    fd[k] = (up - down) / (2 * h);
  }
  CHECK((analytic - fd).norm() / analytic.norm() < 1e-4);
}

TEST_CASE("init is deterministic and finite") {
  const auto a = init_classifier(10, 4, {8, 6}, 5), b = init_classifier(10, 4, {8, 6}, 5);
  CHECK(a == b);
  CHECK_FALSE(a == init_classifier(10, 4, {8, 6}, 6));
  CHECK(a.logits(Eigen::VectorXd::Zero(10)).allFinite());
  CHECK(a.hidden_widths() == std::vector<std::size_t>{8, 6});
}

TEST_CASE("softmax rows sum to one") {
  const long bad = testing::for_all(500, 51, [](Rng& rng, std::size_t) {
    const Eigen::VectorXd z = gaussian_vector(rng, 6, 30.0);
    const Eigen::VectorXd p = softmax(z);
    return std::abs(p.sum() - 1.0) < 1e-9 && (p.array() >= 0.0).all();
  });
  CHECK(bad == -1);
}

TEST_CASE("input jacobian matches finite differences") {
  const Classifier m = init_classifier(5, 3, {7}, 4);
  Rng rng(52);
  const Eigen::VectorXd x = testing::random_ball_point(rng, 5).coords();
  const Eigen::MatrixXd j = m.input_jacobian(x);
  for (Eigen::Index k = 0; k < 5; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(5);
    e[k] = 1e-6;
    const Eigen::VectorXd col = (m.logits(x + e) - m.logits(x - e)) / 2e-6;
    CHECK((col - j.col(k)).norm() < 1e-7);
  }
}

TEST_CASE("geometric penalty") {
  // Constant output: zero first-layer weights.
  Classifier m = init_classifier(3, 2, {4}, 1);
  m.mutable_layers()[0].weight.setZero();
  Rng rng(53);
  const auto cloud = testing::random_cloud(rng, 10, 3);
  CHECK(geometric_penalty(m, cloud) == 0.0);

  // Linear logits f(x) = (w.x, 0): penalty at the origin is |w|^2 / 2.
  Eigen::MatrixXd w(2, 3);
  w << 0.3, -1.2, 2.0, 0.0, 0.0, 0.0;
  const Classifier lin(3, 2, {DenseLayer{w, Eigen::VectorXd::Zero(2)}});
  const std::vector<BallPoint> origin{BallPoint::origin(3)};
  CHECK(geometric_penalty(lin, origin) == Approx(w.row(0).squaredNorm() / 2.0).epsilon(1e-14));

  double prev = std::numeric_limits<double>::infinity();
  for (double r : {0.0, 0.3, 0.6, 0.9, 0.99}) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    x[0] = r;
    const double p = geometric_penalty(lin, std::vector<BallPoint>{BallPoint(x)});
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("no poisoned rows means zero backdoor term") {
  const Classifier m = init_classifier(4, 3, {5}, 2);
  Batch b = random_batch(3, 8, 4, 3);
  std::fill(b.poisoned.begin(), b.poisoned.end(), false);
  const auto g = compute_loss_terms(m, b.points, b.labels, b.poisoned, true);
  CHECK(g.value.backdoor == 0.0);
  CHECK(flatten(g.backdoor).norm() == 0.0);
}

TEST_CASE("training loss decreases on separable toy data") {
  const auto data = separable_toy(54, 200);
  TrainConfig tc;
  tc.lambda1 = 0.0;
  tc.lambda2 = 0.0;
  tc.epochs = 5;
  const std::vector<bool> none(data.size(), false);
  const auto res = train(init_classifier(2, 2, {16}, 3), data, none, tc);
  REQUIRE(res.loss_history.size() == 5);
  for (std::size_t e = 1; e < 5; ++e) CHECK(res.loss_history[e] < res.loss_history[e - 1]);
}

TEST_CASE("linear classifier without hidden layers trains") {
  const auto data = separable_toy(55, 200);
  TrainConfig tc;
  tc.epochs = 15;
  tc.learning_rate = 0.05;
  const std::vector<bool> none(data.size(), false);
  const auto res = train(init_classifier(2, 2, {}, 4), data, none, tc);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += res.model.predict(data.point(i).coords()) == data.label(i);
  CHECK(correct == data.size());
  // The learned separator agrees with the closed-form Bayes direction (x0 sign).
  const auto& w = res.model.layers()[0].weight;
  CHECK((w(1, 0) - w(0, 0)) > 0.0);
}

TEST_CASE("training is deterministic") {
  SyntheticOptions o;
  o.n_samples = 300;
  o.dim = 8;
  const auto data = generate_synthetic(o, 1).train;
  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 17;
  const std::vector<bool> none(data.size(), false);
  const auto a = train(init_classifier(8, 5, {16, 8}, 2), data, none, tc);
  const auto b = train(init_classifier(8, 5, {16, 8}, 2), data, none, tc);
  CHECK(a.model == b.model);
  CHECK(a.loss_history == b.loss_history);
}

TEST_CASE("training rejects a non-finite loss") {
  const auto data = separable_toy(56, 20);
  TrainConfig tc;
  tc.epochs = 1;
  Classifier m = init_classifier(2, 2, {4}, 1);
  m.mutable_layers()[1].weight(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(train(m, data, std::vector<bool>(data.size(), false), tc), TrainingError);
}

TEST_CASE("evaluation of untrained models and identity triggers") {
  SyntheticOptions o;
  o.n_samples = 1000;
  double acc = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto split = generate_synthetic(o, seed);
    TriggerSpec spec;
    spec.delta = Eigen::VectorXd::Zero(50);
    spec.alpha = 0.0;
    spec.noise_sigma = 0.0;
    const Classifier m = init_classifier(50, 5, {64, 32}, seed);
    const EvalReport r = evaluate(m, split.test, spec, 0, TriggerMode::adaptive, seed);
    acc += r.clean_accuracy / 3.0;

    std::size_t rows = 0, hits = 0;
    for (std::size_t i = 0; i < split.test.size(); ++i) {
      if (split.test.label(i) == 0) continue;
      ++rows;
      hits += m.predict(split.test.point(i).coords()) == 0;
    }
    CHECK(r.attack_rows == rows);
    CHECK(r.attack_success_rate == Approx(static_cast<double>(hits) / static_cast<double>(rows)));
    std::size_t binned = 0;
    for (auto c : r.per_bin_count) binned += c;
    CHECK(binned == rows);
  }
  CHECK(acc == Approx(0.2).margin(0.05));
}

TEST_CASE("checkpoint round-trip and corruption") {
  const Classifier m = init_classifier(6, 3, {5, 4}, 9);
  const auto dir = std::filesystem::temp_directory_path() / "hbd_test_model";
  save_checkpoint(m, dir / "m.bin");
  CHECK(load_checkpoint(dir / "m.bin") == m);
  {
    std::ofstream(dir / "bad.bin", std::ios::binary) << "NOTMAGIC";
  }
  CHECK_THROWS(load_checkpoint(dir / "bad.bin"));
}

TEST_CASE("ASR grows with trigger strength") {
  // Averaged over three seeds on a reduced default-shaped dataset.
  std::vector<double> asr;
  for (double alpha : {0.1, 0.2, 0.35}) {
    double mean = 0.0;
    for (std::uint64_t seed : {0, 1, 2}) {
      SyntheticOptions o;
      o.n_samples = 1250;
      const auto split = generate_synthetic(o, seed);
      TriggerSpec spec;
      spec.alpha = alpha;
      spec.delta = Eigen::VectorXd::Zero(50);
      spec.delta = make_sparse_direction(split.train.features(), split.train.labels(), 0, spec.max_support());
      PoisonPlan plan;
      plan.seed = seed;
      plan.selected = select_poison_set(uniform_poison_weights(split.train, 0), 0.05, seed);
      const auto poisoned = build_poisoned_dataset(split.train, plan, spec, TriggerMode::adaptive);
      TrainConfig tc;
      tc.seed = seed;
      const auto model =
          train(init_classifier(50, 5, {64, 32}, seed), poisoned, poisoned_flags(plan, poisoned.size()), tc).model;
      mean += evaluate(model, split.test, spec, 0, TriggerMode::adaptive, seed).attack_success_rate / 3.0;
    }
    asr.push_back(mean);
  }
  CHECK(asr[1] >= asr[0]);
  CHECK(asr[2] >= asr[1]);
}
