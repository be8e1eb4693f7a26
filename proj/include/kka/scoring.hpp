#pragma once

#include <cstdint>
#include <vector>

#include "kka/linalg.hpp"
#include "kka/types.hpp"

namespace kka {

struct GaussianCluster {
  Vec mu;
  Mat sigma;      // sample covariance, unshrunk
  Mat sigma_inv;  // inverse of the shrunk covariance
  std::size_t count = 0;
};

struct ClusterModel {
  std::vector<GaussianCluster> clusters;
  double eps_cov = 1e-3;

  std::size_t k() const { return clusters.size(); }
  std::size_t dim() const {
    return clusters.empty() ? 0 : clusters.front().mu.size();
  }
};

struct ScoreReport {
  std::vector<double> per_cluster;
  double score = 0.0;  // min over per_cluster
};

// sigma + eps_cov * (trace(sigma)/d) * I. When the trace vanishes (all
// points identical) the scale falls back to 1 so the result stays
// invertible.
Mat shrunk_covariance(const Mat& sigma, double eps_cov);

GaussianCluster make_cluster(Vec mu, Mat sigma, std::size_t count,
                             double eps_cov);

// k-means (k-means++ init, Lloyd iterations capped at 200) followed by
// per-cluster mean/covariance estimation. Deterministic for a fixed seed.
ClusterModel fit_cluster_model(const std::vector<Vec>& normals, std::size_t k,
                               std::uint64_t seed, double eps_cov = 1e-3);

// Squared Mahalanobis distance to each cluster; aggregate score is the
// minimum over clusters.
ScoreReport anomaly_score(const ClusterModel& model, const Vec& z);

// Nearest-centroid assignment (Euclidean, ties to the lower cluster index).
std::vector<std::size_t> assign_clusters(const ClusterModel& model,
                                         const std::vector<Vec>& points);

// Per cluster, the assigned sample with the lowest Mahalanobis distance to
// that cluster; ties broken by dataset index. Empty clusters are skipped
// with a warning, so the result may be shorter than k.
std::vector<Sample> select_representatives(const ClusterModel& model,
                                           const std::vector<Sample>& normals);

// Probability that a random anomaly outscores a random normal, ties at 0.5,
// computed by rank statistic. labels: 1 = anomaly, 0 = normal.
double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels);

}  // namespace kka
