#include <doctest.h>

#include <set>

#include "kka/io.hpp"
#include "kka/scoring.hpp"
#include "kka/world.hpp"
#include "test_util.hpp"

using namespace kka;

TEST_CASE("degenerate spec without anomaly clusters") {
  WorldSpec spec;
  spec.n_normal_clusters = 1;
  spec.n_true_anomaly_clusters = 0;
  spec.vocab_size = 4;
  const World w = generate_world(spec);
  CHECK(w.test_true_anomalies.empty());
  CHECK(!w.train_normals.empty());
}

TEST_CASE("near anomaly clusters sit closer to normals than far ones") {
  const World w = generate_world(WorldSpec{});

  auto min_dist_to_normal_center = [&](const Sample& s) {
    double best = 1e300;
    for (std::size_t i = 0; i < w.spec.n_normal_clusters; ++i) {
      Vec center(w.spec.dim, 0.0);
      center[i] = w.spec.cluster_separation;
      best = std::min(best, squared_distance(s.features, center));
    }
    return best;
  };

  double near_avg = 0.0, far_avg = 0.0;
  std::size_t near_n = 0, far_n = 0;
  for (const Sample& s : w.test_true_anomalies) {
    if (s.hardness == Hardness::hard) {
      near_avg += min_dist_to_normal_center(s);
      ++near_n;
    } else {
      far_avg += min_dist_to_normal_center(s);
      ++far_n;
    }
  }
  REQUIRE(near_n > 0);
  REQUIRE(far_n > 0);
  CHECK(near_avg / near_n < far_avg / far_n);
}

TEST_CASE("same seed reproduces the world byte for byte") {
  WorldSpec spec;
  spec.seed = 1234;
  const World a = generate_world(spec);
  const World b = generate_world(spec);
  CHECK(a.prototypes == b.prototypes);
  REQUIRE(a.train_normals.size() == b.train_normals.size());
  for (std::size_t i = 0; i < a.train_normals.size(); ++i) {
    CHECK(a.train_normals[i].features == b.train_normals[i].features);
    CHECK(a.train_normals[i].description == b.train_normals[i].description);
  }

  WorldSpec other = spec;
  other.seed = 1235;
  const World c = generate_world(other);
  CHECK(a.train_normals[0].features != c.train_normals[0].features);
}

TEST_CASE("sample invariants") {
  const World w = generate_world(WorldSpec{});
  std::set<std::uint64_t> ids;
  auto check_group = [&](const std::vector<Sample>& group, Label label) {
    for (const Sample& s : group) {
      CHECK(ids.insert(s.id).second);  // ids unique across splits
      CHECK(s.label == label);
      CHECK(s.description.has_value());
      CHECK(s.description->tokens.size() == w.spec.seq_len);
      CHECK(all_finite(s.features));
      CHECK(s.features.size() == w.spec.dim);
    }
  };
  check_group(w.train_normals, Label::normal);
  check_group(w.test_normals, Label::normal);
  check_group(w.test_true_anomalies, Label::true_anomaly);

  // 70/30 split per cluster.
  CHECK(w.train_normals.size() == 140 * w.spec.n_normal_clusters);
  CHECK(w.test_normals.size() == 60 * w.spec.n_normal_clusters);
}

TEST_CASE("infeasible vocabulary is rejected") {
  WorldSpec spec;
  spec.vocab_size = spec.n_normal_clusters + spec.n_true_anomaly_clusters;
  CHECK_THROWS_AS(generate_world(spec), std::invalid_argument);
}

TEST_CASE("default world has an easy and a hard regime for Mahalanobis") {
  const World w = generate_world(WorldSpec{});
  const ClusterModel model = fit_cluster_model(
      features_of(w.train_normals), w.spec.n_normal_clusters, 7);

  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<double> near_scores, far_scores;
  for (const Sample& s : w.test_normals) {
    scores.push_back(anomaly_score(model, s.features).score);
    labels.push_back(0);
  }
  const std::size_t n_normal = scores.size();
  for (const Sample& s : w.test_true_anomalies) {
    const double sc = anomaly_score(model, s.features).score;
    (s.hardness == Hardness::hard ? near_scores : far_scores).push_back(sc);
  }

  auto auc_vs = [&](const std::vector<double>& anomaly) {
    std::vector<double> sc(scores.begin(), scores.begin() + n_normal);
    std::vector<int> lb(n_normal, 0);
    sc.insert(sc.end(), anomaly.begin(), anomaly.end());
    lb.insert(lb.end(), anomaly.size(), 1);
    return roc_auc(sc, lb);
  };

  CHECK(auc_vs(far_scores) >= 0.99);
  CHECK(auc_vs(near_scores) <= 0.95);
  CHECK(auc_vs(near_scores) > 0.5);
}
