#include <doctest.h>

#include <cmath>

#include "kka/evaluator.hpp"
#include "kka/scoring.hpp"
#include "test_util.hpp"

using namespace kka;

namespace {

// Two well separated 2-D blobs: normals near the origin shifted to (2,2),
// anomalies around (-2,-2).
struct BlobTask {
  std::vector<Vec> normals;
  std::vector<Vec> anomalies;
};

BlobTask make_blobs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  BlobTask task;
  for (std::size_t i = 0; i < n; ++i) {
    task.normals.push_back({2.0 + 0.3 * rng.gaussian(), 2.0 + 0.3 * rng.gaussian()});
    task.anomalies.push_back(
        {-2.0 + 0.3 * rng.gaussian(), -2.0 + 0.3 * rng.gaussian()});
  }
  return task;
}

ConfusionEvaluator small_evaluator(std::uint64_t seed, double weight_decay = 1e-4) {
  ConfusionEvaluator ev = init_evaluator(2, {4, 3}, seed, weight_decay);
  set_center(ev, {{0.5, 0.5}, {1.0, -1.0}, {0.2, 0.8}});
  return ev;
}

std::vector<Sample> as_samples(const std::vector<Vec>& points, Label label,
                               std::uint64_t id0 = 0) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.push_back(oracle::make_sample(id0 + i, points[i], label));
  }
  return out;
}

}  // namespace

TEST_CASE("init_evaluator") {
  SUBCASE("shapes and bound") {
    const ConfusionEvaluator ev = init_evaluator(2, {4}, 1);
    REQUIRE(ev.layers.size() == 1);
    CHECK(ev.layers[0].rows() == 4);
    CHECK(ev.layers[0].cols() == 2);
    CHECK(!ev.center.has_value());
    const double bound = 1.0 / std::sqrt(2.0);
    for (double w : ev.layers[0].data()) {
      CHECK(std::abs(w) <= bound);
    }
  }
  SUBCASE("same seed gives identical weights") {
    CHECK(init_evaluator(3, {5, 2}, 7) == init_evaluator(3, {5, 2}, 7));
  }
  SUBCASE("zero width rejected") {
    CHECK_THROWS_AS(init_evaluator(2, {4, 0}, 1), std::invalid_argument);
    CHECK_THROWS_AS(init_evaluator(2, {}, 1), std::invalid_argument);
  }
}

TEST_CASE("set_center") {
  SUBCASE("mean of initial embeddings") {
    // Identity-like single layer so embeddings equal inputs.
    ConfusionEvaluator ev;
    ev.layers.push_back(Mat::identity(2));
    set_center(ev, {{1.0, 1.0}, {3.0, 3.0}});
    CHECK(*ev.center == Vec{2.0, 2.0});
  }
  SUBCASE("zero mean snaps to +0.1") {
    ConfusionEvaluator ev;
    ev.layers.push_back(Mat::identity(2));
    set_center(ev, {{0.0, 0.0}});
    CHECK(*ev.center == Vec{0.1, 0.1});
  }
  SUBCASE("sign-preserving snap") {
    ConfusionEvaluator ev;
    ev.layers.push_back(Mat::identity(2));
    set_center(ev, {{-0.05, 0.03}});
    CHECK(*ev.center == Vec{-0.1, 0.1});
  }
  SUBCASE("single normal") {
    ConfusionEvaluator ev;
    ev.layers.push_back(Mat::identity(2));
    set_center(ev, {{0.7, -0.9}});
    CHECK(*ev.center == Vec{0.7, -0.9});
  }
  SUBCASE("empty input and double set rejected") {
    ConfusionEvaluator ev = init_evaluator(2, {3}, 1);
    CHECK_THROWS_AS(set_center(ev, {}), std::invalid_argument);
    set_center(ev, {{1.0, 2.0}});
    CHECK_THROWS_AS(set_center(ev, {{1.0, 2.0}}), std::logic_error);
  }
}

TEST_CASE("sad_loss closed forms") {
  SUBCASE("normal exactly at the center") {
    ConfusionEvaluator ev;
    ev.layers.push_back(Mat::identity(2));
    ev.weight_decay = 1e-300;  // effectively zero but valid
    set_center(ev, {{1.0, 2.0}});
    const double loss = sad_loss(ev, {{{1.0, 2.0}, +1}});
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("anomaly at unit distance") {
    ConfusionEvaluator ev;
    ev.layers.push_back(Mat::identity(2));
    ev.weight_decay = 1e-300;
    ev.eps_inv = 0.0;
    set_center(ev, {{1.0, 2.0}});
    // regularizer = (lambda/2)*2 which is negligible here
    const double loss = sad_loss(ev, {{{2.0, 2.0}, -1}});
    CHECK(loss == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("empty data term leaves the regularizer") {
    ConfusionEvaluator ev;
    Mat w(1, 1);
    w(0, 0) = 3.0;
    ev.layers.push_back(w);
    ev.weight_decay = 2.0;
    ev.center = Vec{0.1};
    CHECK(sad_loss(ev, {}) == doctest::Approx(9.0).epsilon(1e-12));
  }
  SUBCASE("center unset is a state error") {
    const ConfusionEvaluator ev = init_evaluator(2, {3}, 1);
    CHECK_THROWS_AS(sad_loss(ev, {{{1.0, 1.0}, 1}}), std::logic_error);
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    ConfusionEvaluator ev = small_evaluator(1000 + trial, 0.05);
    std::vector<LabeledVec> batch;
    for (int i = 0; i < 5; ++i) {
      batch.push_back(
          {oracle::random_vec(2, rng, 1.5), rng.uniform() < 0.5 ? 1 : -1});
    }
    const std::vector<Mat> grads = sad_loss_gradient(ev, batch);
    for (std::size_t l = 0; l < ev.layers.size(); ++l) {
      for (std::size_t i = 0; i < ev.layers[l].data().size(); ++i) {
        const double fd = oracle::central_difference(
            [&] { return sad_loss(ev, batch); },
            [&]() -> double& { return ev.layers[l].data()[i]; });
        CHECK(oracle::relative_error(grads[l].data()[i], fd) < 1e-4);
      }
    }
  }
}

TEST_CASE("train_evaluator separates a separable task") {
  const BlobTask task = make_blobs(60, 2024);
  ConfusionEvaluator ev = init_evaluator(2, {8, 4}, 3);
  set_center(ev, task.normals);

  const TrainResult result =
      train_evaluator(ev, task.normals, task.anomalies, 200, 1e-2, 5);
  REQUIRE(result.loss_curve.size() == 200);

  double normal_mean = 0.0, anomaly_mean = 0.0;
  for (const Vec& x : task.normals) {
    normal_mean += evaluator_distance(result.evaluator, x);
  }
  for (const Vec& x : task.anomalies) {
    anomaly_mean += evaluator_distance(result.evaluator, x);
  }
  normal_mean /= static_cast<double>(task.normals.size());
  anomaly_mean /= static_cast<double>(task.anomalies.size());
  CHECK(normal_mean < anomaly_mean);
  CHECK(!result.loss_increased);
}

TEST_CASE("train_evaluator with lr=0 is a no-op on weights") {
  const BlobTask task = make_blobs(20, 55);
  ConfusionEvaluator ev = init_evaluator(2, {4}, 9);
  set_center(ev, task.normals);
  const TrainResult result =
      train_evaluator(ev, task.normals, task.anomalies, 3, 0.0, 5);
  CHECK(result.evaluator.layers == ev.layers);
}

TEST_CASE("training on normals only is pure one-class mode") {
  const BlobTask task = make_blobs(40, 77);
  ConfusionEvaluator ev = init_evaluator(2, {4}, 11);
  set_center(ev, task.normals);
  const TrainResult result = train_evaluator(ev, task.normals, {}, 50, 1e-2, 5);
  // Normals end closer to the center than at initialization.
  double before = 0.0, after = 0.0;
  for (const Vec& x : task.normals) {
    before += evaluator_distance(ev, x);
    after += evaluator_distance(result.evaluator, x);
  }
  CHECK(after < before);
}

TEST_CASE("hypersphere AUC on held-out separable data") {
  const BlobTask train = make_blobs(80, 31337);
  const BlobTask held_out = make_blobs(40, 4242);
  ConfusionEvaluator ev = init_evaluator(2, {8, 4}, 12);
  set_center(ev, train.normals);
  const TrainResult result =
      train_evaluator(ev, train.normals, train.anomalies, 200, 1e-2, 6);

  std::vector<double> scores;
  std::vector<int> labels;
  for (const Vec& x : held_out.normals) {
    scores.push_back(evaluator_distance(result.evaluator, x));
    labels.push_back(0);
  }
  for (const Vec& x : held_out.anomalies) {
    scores.push_back(evaluator_distance(result.evaluator, x));
    labels.push_back(1);
  }
  CHECK(roc_auc(scores, labels) >= 0.95);
}

TEST_CASE("evaluator_distance") {
  ConfusionEvaluator ev;
  ev.layers.push_back(Mat::identity(3));
  set_center(ev, {{1.0, 1.0, 1.0}});

  SUBCASE("zero at the center") {
    CHECK(evaluator_distance(ev, {1.0, 1.0, 1.0}) == 0.0);
  }
  SUBCASE("3-4-5 triangle") {
    CHECK(evaluator_distance(ev, {4.0, 5.0, 1.0}) ==
          doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("pure function of its input") {
    const double first = evaluator_distance(ev, {2.0, 0.0, 1.0});
    evaluator_distance(ev, {9.0, 9.0, 9.0});
    CHECK(evaluator_distance(ev, {2.0, 0.0, 1.0}) == first);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(evaluator_distance(ev, {1.0}), std::invalid_argument);
  }
}

TEST_CASE("all-zero weights cannot collapse the sphere") {
  ConfusionEvaluator ev;
  ev.layers.push_back(Mat(3, 2, 0.0));
  ev.layers.push_back(Mat(2, 3, 0.0));
  set_center(ev, {{0.4, -0.2}});
  // Embedding is identically zero but the center was snapped away from it.
  const double loss = sad_loss(ev, {{{0.4, -0.2}, +1}});
  CHECK(loss > 0.0);
}

TEST_CASE("partition_hardness") {
  ConfusionEvaluator ev;
  ev.layers.push_back(Mat::identity(1));
  set_center(ev, {{0.1}});  // distances are |x - 0.1|
  // Normal distances 1.0 and 2.0.
  const std::vector<Sample> normals = {oracle::make_sample(0, {1.1}),
                                       oracle::make_sample(1, {2.1})};

  SUBCASE("strictly inside the max is hard") {
    const auto part = partition_hardness(
        ev, {oracle::make_sample(10, {1.6}, Label::generated_anomaly)}, normals);
    CHECK(part.threshold == doctest::Approx(2.0));
    REQUIRE(part.hard.size() == 1);
    CHECK(part.hard[0].hardness == Hardness::hard);
    CHECK(part.easy.empty());
  }
  SUBCASE("outside is easy") {
    const auto part = partition_hardness(
        ev, {oracle::make_sample(10, {2.6}, Label::generated_anomaly)}, normals);
    CHECK(part.hard.empty());
    REQUIRE(part.easy.size() == 1);
    CHECK(part.easy[0].hardness == Hardness::easy);
  }
  SUBCASE("exactly at the max is easy") {
    const auto part = partition_hardness(
        ev, {oracle::make_sample(10, {2.1}, Label::generated_anomaly)}, normals);
    CHECK(part.hard.empty());
    CHECK(part.easy.size() == 1);
  }
  SUBCASE("lower quantile lowers the threshold") {
    const auto part = partition_hardness(
        ev, {oracle::make_sample(10, {1.6}, Label::generated_anomaly)}, normals,
        0.5);
    CHECK(part.threshold == doctest::Approx(1.0));
    CHECK(part.hard.empty());
  }
  SUBCASE("empty normals rejected") {
    CHECK_THROWS_AS(
        partition_hardness(ev, {oracle::make_sample(0, {1.0})}, {}, 1.0),
        std::invalid_argument);
  }
}

TEST_CASE("partition totality and idempotence") {
  Rng rng(404);
  ConfusionEvaluator ev = init_evaluator(3, {5, 2}, 8);
  std::vector<Vec> centers;
  for (int i = 0; i < 10; ++i) centers.push_back(oracle::random_vec(3, rng));
  set_center(ev, centers);

  const auto normals = as_samples(centers, Label::normal);
  std::vector<Sample> anomalies;
  for (int i = 0; i < 40; ++i) {
    anomalies.push_back(oracle::make_sample(
        100 + i, oracle::random_vec(3, rng, 2.0), Label::generated_anomaly));
  }

  const auto part = partition_hardness(ev, anomalies, normals);
  CHECK(part.hard.size() + part.easy.size() == anomalies.size());

  // Re-running on the concatenated output reproduces the same split.
  std::vector<Sample> reunited = part.hard;
  reunited.insert(reunited.end(), part.easy.begin(), part.easy.end());
  const auto again = partition_hardness(ev, reunited, normals);
  CHECK(again.hard.size() == part.hard.size());
  CHECK(again.easy.size() == part.easy.size());
  for (const Sample& s : again.hard) CHECK(s.hardness == Hardness::hard);
}
