#include "kka/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace kka {

namespace {

void check_input(const std::vector<Vec>& normals, std::size_t k) {
  if (k == 0) throw std::invalid_argument("fit_cluster_model: k must be >= 1");
  if (normals.size() < k) {
    throw std::invalid_argument("fit_cluster_model: fewer samples (" +
                                std::to_string(normals.size()) +
                                ") than clusters (" + std::to_string(k) + ")");
  }
  const std::size_t d = normals.front().size();
  if (d == 0) throw std::invalid_argument("fit_cluster_model: empty vectors");
  for (const Vec& v : normals) {
    if (v.size() != d) {
      throw std::invalid_argument("fit_cluster_model: mixed dimensions");
    }
    if (!all_finite(v)) {
      throw std::invalid_argument("fit_cluster_model: non-finite input");
    }
  }
}

// k-means++ seeding.
std::vector<Vec> init_centroids(const std::vector<Vec>& points, std::size_t k,
                                Rng& rng) {
  std::vector<Vec> centroids;
  centroids.reserve(k);
  centroids.push_back(points[rng.uniform_index(points.size())]);

  Vec d2(points.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec& c : centroids) {
        best = std::min(best, squared_distance(points[i], c));
      }
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
        pick = i;
      }
    } else {
      // All remaining points coincide with existing centroids.
      pick = rng.uniform_index(points.size());
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

}  // namespace

Mat shrunk_covariance(const Mat& sigma, double eps_cov) {
  const std::size_t d = sigma.rows();
  double scale = trace(sigma) / static_cast<double>(d);
  if (!(scale > 0.0)) scale = 1.0;
  Mat out = sigma;
  for (std::size_t i = 0; i < d; ++i) out(i, i) += eps_cov * scale;
  return out;
}

GaussianCluster make_cluster(Vec mu, Mat sigma, std::size_t count,
                             double eps_cov) {
  GaussianCluster c;
  c.sigma_inv = spd_inverse(shrunk_covariance(sigma, eps_cov));
  c.mu = std::move(mu);
  c.sigma = std::move(sigma);
  c.count = count;
  return c;
}

ClusterModel fit_cluster_model(const std::vector<Vec>& normals, std::size_t k,
                               std::uint64_t seed, double eps_cov) {
  check_input(normals, k);
  if (!(eps_cov > 0.0)) {
    throw std::invalid_argument("fit_cluster_model: eps_cov must be > 0");
  }
  const std::size_t n = normals.size();
  const std::size_t d = normals.front().size();

  Rng rng(seed);
  std::vector<Vec> centroids = init_centroids(normals, k, rng);
  std::vector<std::size_t> assignment(n, 0);

  const int max_iters = 200;
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = squared_distance(normals[i], centroids[c]);
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    std::vector<Vec> sums(k, Vec(d, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      counts[assignment[i]]++;
      for (std::size_t j = 0; j < d; ++j) sums[assignment[i]][j] += normals[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // keep the previous centroid
      for (std::size_t j = 0; j < d; ++j) {
        centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
      }
    }
  }

  ClusterModel model;
  model.eps_cov = eps_cov;
  model.clusters.reserve(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (assignment[i] == c) members.push_back(i);
    }

    Vec mu = centroids[c];
    if (!members.empty()) {
      std::fill(mu.begin(), mu.end(), 0.0);
      for (std::size_t i : members) {
        for (std::size_t j = 0; j < d; ++j) mu[j] += normals[i][j];
      }
      for (std::size_t j = 0; j < d; ++j) {
        mu[j] /= static_cast<double>(members.size());
      }
    }

    Mat sigma(d, d);
    if (!members.empty()) {
      for (std::size_t i : members) {
        for (std::size_t r = 0; r < d; ++r) {
          const double dr = normals[i][r] - mu[r];
          for (std::size_t cc = 0; cc < d; ++cc) {
            sigma(r, cc) += dr * (normals[i][cc] - mu[cc]);
          }
        }
      }
      const double inv_n = 1.0 / static_cast<double>(members.size());
      for (double& x : sigma.data()) x *= inv_n;
    }

    model.clusters.push_back(make_cluster(std::move(mu), std::move(sigma),
                                          members.size(), eps_cov));
  }
  return model;
}

ScoreReport anomaly_score(const ClusterModel& model, const Vec& z) {
  if (model.clusters.empty()) {
    throw std::invalid_argument("anomaly_score: model has no clusters");
  }
  if (z.size() != model.dim()) {
    throw std::invalid_argument(
        "anomaly_score: dimension mismatch (query " + std::to_string(z.size()) +
        ", model " + std::to_string(model.dim()) + ")");
  }
  ScoreReport report;
  report.per_cluster.reserve(model.k());
  double best = std::numeric_limits<double>::infinity();
  for (const GaussianCluster& c : model.clusters) {
    const Vec diff = sub(z, c.mu);
    const double s = std::max(0.0, quadratic_form(c.sigma_inv, diff));
    report.per_cluster.push_back(s);
    best = std::min(best, s);
  }
  report.score = best;
  return report;
}

std::vector<std::size_t> assign_clusters(const ClusterModel& model,
                                         const std::vector<Vec>& points) {
  std::vector<std::size_t> out(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < model.k(); ++c) {
      const double dd = squared_distance(points[i], model.clusters[c].mu);
      if (dd < best_d) {
        best_d = dd;
        out[i] = c;
      }
    }
  }
  return out;
}

std::vector<Sample> select_representatives(const ClusterModel& model,
                                           const std::vector<Sample>& normals) {
  for (const Sample& s : normals) {
    if (!s.description.has_value()) {
      throw std::invalid_argument(
          "select_representatives: sample " + std::to_string(s.id) +
          " has no token description");
    }
  }
  const std::vector<std::size_t> assignment =
      assign_clusters(model, features_of(normals));

  std::vector<Sample> reps;
  for (std::size_t c = 0; c < model.k(); ++c) {
    std::size_t best_idx = normals.size();
    double best_s = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < normals.size(); ++i) {
      if (assignment[i] != c) continue;
      const double s =
          anomaly_score(model, normals[i].features).per_cluster[c];
      if (s < best_s) {
        best_s = s;
        best_idx = i;
      }
    }
    if (best_idx == normals.size()) {
      log_warn("select_representatives: cluster " + std::to_string(c) +
               " is empty, skipping");
      continue;
    }
    reps.push_back(normals[best_idx]);
  }
  return reps;
}

double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("roc_auc: scores/labels size mismatch");
  }
  std::size_t n_anomaly = 0;
  for (int l : labels) n_anomaly += (l != 0);
  const std::size_t n_normal = labels.size() - n_anomaly;
  if (n_anomaly == 0 || n_normal == 0) {
    throw std::invalid_argument("roc_auc: both classes required");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Rank-sum with average ranks for ties.
  double anomaly_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) {
      ++j;
    }
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) +
                                   static_cast<double>(j + 1));
    for (std::size_t t = i; t <= j; ++t) {
      if (labels[order[t]] != 0) anomaly_rank_sum += avg_rank;
    }
    i = j + 1;
  }

  const double na = static_cast<double>(n_anomaly);
  const double nn = static_cast<double>(n_normal);
  return (anomaly_rank_sum - na * (na + 1.0) / 2.0) / (na * nn);
}

}  // namespace kka
