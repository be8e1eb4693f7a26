#include <doctest.h>

#include <cmath>

#include "kka/renderer.hpp"
#include "kka/scoring.hpp"
#include "test_util.hpp"

using namespace kka;

namespace {

TokenSequence seq(std::vector<int> tokens) {
  TokenSequence s;
  s.tokens = std::move(tokens);
  return s;
}

PrototypeTable table_2d(double noise = 0.0) {
  PrototypeTable t;
  t.prototypes = Mat(4, 2, 0.0);
  t.prototypes(1, 0) = 2.0;
  t.prototypes(1, 1) = 2.0;
  t.prototypes(2, 0) = -1.0;
  t.prototypes(3, 1) = 4.0;
  t.noise_sigma = noise;
  return t;
}

}  // namespace

TEST_CASE("render without noise") {
  const PrototypeTable t = table_2d();
  SUBCASE("repeated token yields its prototype") {
    CHECK(render(t, seq({1, 1, 1}), 0) == Vec{2.0, 2.0});
  }
  SUBCASE("mean of two prototypes") {
    PrototypeTable pair = t;
    pair.prototypes(2, 0) = 2.0;
    pair.prototypes(2, 1) = 2.0;
    pair.prototypes(1, 0) = 0.0;
    pair.prototypes(1, 1) = 0.0;
    CHECK(render(pair, seq({1, 2}), 0) == Vec{1.0, 1.0});
  }
  SUBCASE("empty sequence rejected") {
    CHECK_THROWS_AS(render(t, seq({}), 0), std::invalid_argument);
  }
  SUBCASE("out-of-vocabulary token rejected") {
    CHECK_THROWS_AS(render(t, seq({4}), 0), std::invalid_argument);
  }
}

TEST_CASE("render noise statistics") {
  PrototypeTable t = table_2d(0.1);
  const TokenSequence s = seq({1, 2});
  const Vec clean = [&] {
    PrototypeTable quiet = t;
    quiet.noise_sigma = 0.0;
    return render(quiet, s, 0);
  }();

  const int n = 10000;
  Vec mean(2, 0.0);
  for (int i = 0; i < n; ++i) {
    const Vec r = render(t, s, 1000 + i);
    mean[0] += r[0];
    mean[1] += r[1];
  }
  mean[0] /= n;
  mean[1] /= n;
  const double bound = 3.0 * 0.1 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean[0] - clean[0]) < bound);
  CHECK(std::abs(mean[1] - clean[1]) < bound);
}

TEST_CASE("render is deterministic given the seed") {
  const PrototypeTable t = table_2d(0.5);
  CHECK(render(t, seq({1, 3}), 42) == render(t, seq({1, 3}), 42));
  CHECK(render(t, seq({1, 3}), 42) != render(t, seq({1, 3}), 43));
}

TEST_CASE("render is permutation-invariant at zero noise") {
  Rng rng(99);
  PrototypeTable t;
  t.prototypes = Mat(6, 3);
  for (double& v : t.prototypes.data()) v = rng.gaussian();
  t.noise_sigma = 0.0;

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> tokens;
    for (int i = 0; i < 5; ++i) {
      tokens.push_back(static_cast<int>(rng.uniform_index(6)));
    }
    std::vector<int> permuted = tokens;
    rng.shuffle(permuted);
    const Vec a = render(t, seq(tokens), 0);
    const Vec b = render(t, seq(permuted), 0);
    for (std::size_t j = 0; j < a.size(); ++j) {
      CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("sequences of in-cluster prototypes render inside the cluster") {
  // Fit a cluster, build prototypes from points inside it, render mixtures.
  Rng rng(123);
  std::vector<Vec> points;
  for (int i = 0; i < 200; ++i) {
    points.push_back({5.0 + 0.5 * rng.gaussian(), -3.0 + 0.5 * rng.gaussian()});
  }
  const ClusterModel model = fit_cluster_model(points, 1, 7);

  // Prototypes: the cluster mean plus small offsets, all within 2 sigma.
  PrototypeTable t;
  t.prototypes = Mat(4, 2);
  for (std::size_t p = 0; p < 4; ++p) {
    Vec candidate;
    do {
      candidate = {model.clusters[0].mu[0] + 0.4 * rng.gaussian(),
                   model.clusters[0].mu[1] + 0.4 * rng.gaussian()};
    } while (anomaly_score(model, candidate).score > 4.0);
    t.prototypes(p, 0) = candidate[0];
    t.prototypes(p, 1) = candidate[1];
  }
  t.noise_sigma = 0.0;

  // Mahalanobis balls are convex, so every mean-pooled sequence stays inside.
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> tokens;
    for (int i = 0; i < 4; ++i) {
      tokens.push_back(static_cast<int>(rng.uniform_index(4)));
    }
    const Vec rendered = render(t, seq(tokens), 0);
    CHECK(anomaly_score(model, rendered).score <= 4.0 + 1e-9);
  }
}
