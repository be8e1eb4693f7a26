#include <doctest.h>

#include <cmath>

#include "kka/scoring.hpp"
#include "test_util.hpp"

using namespace kka;

namespace {

ClusterModel model_from(std::vector<Vec> mus, std::vector<Mat> sigmas,
                        double eps_cov = 1e-12) {
  ClusterModel model;
  model.eps_cov = eps_cov;
  for (std::size_t i = 0; i < mus.size(); ++i) {
    model.clusters.push_back(
        make_cluster(std::move(mus[i]), std::move(sigmas[i]), 1, eps_cov));
  }
  return model;
}

}  // namespace

TEST_CASE("fit recovers a single Gaussian") {
  Rng rng(7);
  std::vector<Vec> points;
  for (int i = 0; i < 100; ++i) points.push_back(oracle::random_vec(2, rng));

  const ClusterModel model = fit_cluster_model(points, 1, 42);
  REQUIRE(model.k() == 1);
  const GaussianCluster& c = model.clusters[0];
  CHECK(c.count == 100);
  CHECK(std::abs(c.mu[0]) < 0.5);
  CHECK(std::abs(c.mu[1]) < 0.5);
  CHECK(std::abs(c.sigma(0, 0) - 1.0) < 0.5);
  CHECK(std::abs(c.sigma(1, 1) - 1.0) < 0.5);
  CHECK(std::abs(c.sigma(0, 1)) < 0.5);
}

TEST_CASE("fit handles duplicated points through shrinkage") {
  const std::vector<Vec> points = {{0.0, 0.0}, {0.0, 0.0}};
  const ClusterModel model = fit_cluster_model(points, 1, 1);
  const GaussianCluster& c = model.clusters[0];
  CHECK(c.mu == Vec{0.0, 0.0});
  CHECK(c.sigma(0, 0) == 0.0);
  CHECK(c.sigma(1, 1) == 0.0);
  // Inverse exists and matches the shrunk covariance.
  const Mat shrunk = shrunk_covariance(c.sigma, model.eps_cov);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double prod = 0.0;
      for (std::size_t k = 0; k < 2; ++k) prod += c.sigma_inv(i, k) * shrunk(k, j);
      CHECK(std::abs(prod - (i == j ? 1.0 : 0.0)) < 1e-8);
    }
  }
}

TEST_CASE("fit with k equal to n puts one point per cluster") {
  const std::vector<Vec> points = {{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}};
  const ClusterModel model = fit_cluster_model(points, 3, 5);
  REQUIRE(model.k() == 3);
  for (const GaussianCluster& c : model.clusters) CHECK(c.count == 1);
}

TEST_CASE("fit input validation") {
  CHECK_THROWS_AS(fit_cluster_model({{1.0, 2.0}}, 2, 0), std::invalid_argument);
  const double nan = std::nan("");
  CHECK_THROWS_AS(fit_cluster_model({{nan, 0.0}, {0.0, 1.0}}, 1, 0),
                  std::invalid_argument);
}

TEST_CASE("fit is bit-reproducible for a fixed seed") {
  Rng rng(11);
  std::vector<Vec> points;
  for (int i = 0; i < 60; ++i) points.push_back(oracle::random_vec(3, rng, 2.0));

  const ClusterModel a = fit_cluster_model(points, 4, 99);
  const ClusterModel b = fit_cluster_model(points, 4, 99);
  REQUIRE(a.k() == b.k());
  for (std::size_t i = 0; i < a.k(); ++i) {
    CHECK(a.clusters[i].mu == b.clusters[i].mu);
    CHECK(a.clusters[i].sigma == b.clusters[i].sigma);
    CHECK(a.clusters[i].count == b.clusters[i].count);
  }
}

TEST_CASE("anomaly_score basics") {
  SUBCASE("query at the mean scores zero") {
    const ClusterModel model = model_from({{0.0, 0.0}}, {Mat::identity(2)});
    CHECK(anomaly_score(model, {0.0, 0.0}).score == 0.0);
  }
  SUBCASE("diagonal covariance evaluates componentwise") {
    Mat sigma(2, 2);
    sigma(0, 0) = 2.0;
    sigma(1, 1) = 1.0;
    const ClusterModel model = model_from({{0.0, 0.0}}, {sigma});
    const ScoreReport r = anomaly_score(model, {2.0, 1.0});
    CHECK(r.score == doctest::Approx(3.0).epsilon(1e-9));
  }
  SUBCASE("aggregate is the minimum over clusters") {
    const ClusterModel model = model_from({{10.0, 0.0}, {1.0, 1.0}},
                                          {Mat::identity(2), Mat::identity(2)});
    const ScoreReport r = anomaly_score(model, {1.0, 0.0});
    REQUIRE(r.per_cluster.size() == 2);
    CHECK(r.score == std::min(r.per_cluster[0], r.per_cluster[1]));
    CHECK(r.score == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("dimension mismatch") {
    const ClusterModel model = model_from({{0.0, 0.0}}, {Mat::identity(2)});
    CHECK_THROWS_AS(anomaly_score(model, {1.0, 2.0, 3.0}),
                    std::invalid_argument);
  }
}

TEST_CASE("scores are nonnegative and translation-covariant") {
  Rng rng(23);
  std::vector<Vec> points;
  for (int i = 0; i < 80; ++i) points.push_back(oracle::random_vec(4, rng, 3.0));
  const Vec shift = {12.5, -7.0, 3.25, 40.0};
  std::vector<Vec> shifted;
  for (const Vec& p : points) shifted.push_back(add(p, shift));

  const ClusterModel model = fit_cluster_model(points, 2, 3);
  const ClusterModel shifted_model = fit_cluster_model(shifted, 2, 3);

  for (int i = 0; i < 20; ++i) {
    const Vec q = oracle::random_vec(4, rng, 3.0);
    const ScoreReport a = anomaly_score(model, q);
    const ScoreReport b = anomaly_score(shifted_model, add(q, shift));
    REQUIRE(a.per_cluster.size() == b.per_cluster.size());
    for (std::size_t k = 0; k < a.per_cluster.size(); ++k) {
      CHECK(a.per_cluster[k] >= 0.0);
      CHECK(a.per_cluster[k] ==
            doctest::Approx(b.per_cluster[k]).epsilon(1e-10));
    }
  }
}

TEST_CASE("identity covariance reduces to squared Euclidean distance") {
  const ClusterModel model = model_from({{1.0, -2.0, 0.5}}, {Mat::identity(3)});
  Rng rng(31);
  for (int i = 0; i < 25; ++i) {
    const Vec q = oracle::random_vec(3, rng, 2.0);
    const double expected = squared_distance(q, model.clusters[0].mu);
    CHECK(anomaly_score(model, q).score ==
          doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("anomaly_score matches the Gaussian-elimination oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 1 + rng.uniform_index(10);
    const Mat sigma = oracle::random_spd(d, rng);
    const Vec mu = oracle::random_vec(d, rng, 2.0);
    const Vec q = oracle::random_vec(d, rng, 2.0);

    const ClusterModel model = model_from({mu}, {sigma});
    const Mat inv = oracle::ge_inverse(sigma);
    const double expected = quadratic_form(inv, sub(q, mu));
    CHECK(std::abs(anomaly_score(model, q).score - expected) < 1e-8);
  }
}

TEST_CASE("select_representatives picks per-cluster argmin") {
  SUBCASE("single cluster argmin with tie-break by index") {
    const ClusterModel model = model_from({{0.0}}, {Mat::identity(1)});
    std::vector<Sample> samples = {
        oracle::make_sample(0, {3.0}, Label::normal, {1}),
        oracle::make_sample(1, {0.5}, Label::normal, {2}),
        oracle::make_sample(2, {2.0}, Label::normal, {3}),
    };
    auto reps = select_representatives(model, samples);
    REQUIRE(reps.size() == 1);
    CHECK(reps[0].id == 1);

    samples = {oracle::make_sample(5, {1.0}, Label::normal, {1}),
               oracle::make_sample(6, {-1.0}, Label::normal, {2})};
    reps = select_representatives(model, samples);
    REQUIRE(reps.size() == 1);
    CHECK(reps[0].id == 5);  // equal scores, lower dataset index wins
  }

  SUBCASE("two separable clusters") {
    std::vector<Sample> samples;
    std::vector<Vec> points;
    Rng rng(9);
    for (int i = 0; i < 30; ++i) {
      Vec p = oracle::random_vec(2, rng, 0.5);
      p[0] += (i < 15) ? -10.0 : 10.0;
      points.push_back(p);
      samples.push_back(oracle::make_sample(i, p, Label::normal, {1, 2}));
    }
    const ClusterModel model = fit_cluster_model(points, 2, 4);
    const auto reps = select_representatives(model, samples);
    REQUIRE(reps.size() == 2);

    // Brute force per cluster.
    const auto assignment = assign_clusters(model, points);
    for (std::size_t c = 0; c < 2; ++c) {
      std::size_t best = points.size();
      double best_s = 1e300;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (assignment[i] != c) continue;
        const double s = anomaly_score(model, points[i]).per_cluster[c];
        if (s < best_s) {
          best_s = s;
          best = i;
        }
      }
      CHECK(reps[c].id == samples[best].id);
    }
  }

  SUBCASE("missing description is rejected") {
    const ClusterModel model = model_from({{0.0}}, {Mat::identity(1)});
    const std::vector<Sample> samples = {oracle::make_sample(0, {1.0})};
    CHECK_THROWS_AS(select_representatives(model, samples),
                    std::invalid_argument);
  }
}

TEST_CASE("roc_auc") {
  SUBCASE("perfect separation") {
    CHECK(roc_auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
  }
  SUBCASE("all ties") {
    CHECK(roc_auc({0.5, 0.5, 0.5}, {0, 1, 1}) == 0.5);
  }
  SUBCASE("mixed") {
    CHECK(roc_auc({0.5, 0.4, 0.6}, {0, 1, 1}) == 0.5);
  }
  SUBCASE("single class rejected") {
    CHECK_THROWS_AS(roc_auc({0.5, 0.6}, {1, 1}), std::invalid_argument);
  }
  SUBCASE("agrees exactly with the pairwise definition") {
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 2 + rng.uniform_index(49);
      std::vector<double> scores(n);
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        // Coarse value grid to force plenty of ties.
        scores[i] = static_cast<double>(rng.uniform_index(6)) / 4.0;
        labels[i] = rng.uniform() < 0.5 ? 0 : 1;
      }
      labels[0] = 0;
      labels[n - 1] = 1;
      CHECK(roc_auc(scores, labels) ==
            oracle::brute_force_auc(scores, labels));
    }
  }
}
