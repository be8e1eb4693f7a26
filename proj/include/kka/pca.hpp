#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kka/linalg.hpp"
#include "kka/types.hpp"

namespace kka {

// Linear projection onto the top principal components of a point set.
// Doubles as the optional feature-space reducer for renderers that emit
// higher-dimensional features than the scoring model expects.
struct PcaProjection {
  Vec mean;
  Mat components;  // q x d, rows are principal directions

  Vec project(const Vec& x) const;
};

PcaProjection fit_pca(const std::vector<Vec>& points, std::size_t q);

struct PlotPoint {
  std::uint64_t id = 0;
  std::string group;  // normal / easy / hard / true_anomaly
  double x = 0.0;
  double y = 0.0;
};

// 2-D PCA projection of the combined sample groups.
std::vector<PlotPoint> project_groups(
    const std::vector<Sample>& normals,
    const std::vector<Sample>& generated_anomalies,
    const std::vector<Sample>& true_anomalies);

void save_plot_csv(const std::filesystem::path& path,
                   const std::vector<PlotPoint>& points);
void save_scatter_svg(const std::filesystem::path& path,
                      const std::vector<PlotPoint>& points);

}  // namespace kka
