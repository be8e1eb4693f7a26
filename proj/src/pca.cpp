#include "kka/pca.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace kka {

Vec PcaProjection::project(const Vec& x) const {
  return matvec(components, sub(x, mean));
}

PcaProjection fit_pca(const std::vector<Vec>& points, std::size_t q) {
  if (points.empty()) throw std::invalid_argument("fit_pca: no points");
  const std::size_t d = points.front().size();
  if (q == 0 || q > d) {
    throw std::invalid_argument("fit_pca: q must be in [1, d]");
  }

  PcaProjection proj;
  proj.mean.assign(d, 0.0);
  for (const Vec& p : points) {
    for (std::size_t j = 0; j < d; ++j) proj.mean[j] += p[j];
  }
  for (double& v : proj.mean) v /= static_cast<double>(points.size());

  Mat cov(d, d);
  for (const Vec& p : points) {
    const Vec c = sub(p, proj.mean);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t col = 0; col < d; ++col) cov(r, col) += c[r] * c[col];
    }
  }
  for (double& v : cov.data()) v /= static_cast<double>(points.size());

  const EigenSym eig = jacobi_eigen(cov);
  proj.components = Mat(q, d);
  for (std::size_t r = 0; r < q; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      proj.components(r, c) = eig.vectors(c, r);
    }
  }
  return proj;
}

std::vector<PlotPoint> project_groups(
    const std::vector<Sample>& normals,
    const std::vector<Sample>& generated_anomalies,
    const std::vector<Sample>& true_anomalies) {
  std::vector<Vec> all;
  auto collect = [&all](const std::vector<Sample>& group) {
    for (const Sample& s : group) all.push_back(s.features);
  };
  collect(normals);
  collect(generated_anomalies);
  collect(true_anomalies);
  if (all.empty()) return {};

  const std::size_t d = all.front().size();
  const PcaProjection proj = fit_pca(all, std::min<std::size_t>(2, d));

  std::vector<PlotPoint> points;
  points.reserve(all.size());
  auto emit = [&](const Sample& s, const std::string& group) {
    const Vec p = proj.project(s.features);
    PlotPoint pt;
    pt.id = s.id;
    pt.group = group;
    pt.x = p[0];
    pt.y = p.size() > 1 ? p[1] : 0.0;
    points.push_back(std::move(pt));
  };
  for (const Sample& s : normals) emit(s, "normal");
  for (const Sample& s : generated_anomalies) {
    emit(s, s.hardness == Hardness::hard ? "hard" : "easy");
  }
  for (const Sample& s : true_anomalies) emit(s, "true_anomaly");
  return points;
}

void save_plot_csv(const std::filesystem::path& path,
                   const std::vector<PlotPoint>& points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "id,group,x,y\n";
  char buf[80];
  for (const PlotPoint& p : points) {
    std::snprintf(buf, sizeof(buf), "%llu,%s,%.6f,%.6f\n",
                  static_cast<unsigned long long>(p.id), p.group.c_str(), p.x,
                  p.y);
    out << buf;
  }
}

void save_scatter_svg(const std::filesystem::path& path,
                      const std::vector<PlotPoint>& points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());

  const double width = 640.0, height = 480.0, margin = 40.0;
  double xmin = -1.0, xmax = 1.0, ymin = -1.0, ymax = 1.0;
  if (!points.empty()) {
    xmin = xmax = points.front().x;
    ymin = ymax = points.front().y;
    for (const PlotPoint& p : points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
    if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  }
  auto sx = [&](double x) {
    return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
  };
  auto sy = [&](double y) {
    return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
  };

  const std::map<std::string, std::string> colors = {
      {"normal", "#3b6fc9"},
      {"easy", "#54b06b"},
      {"hard", "#e08a2e"},
      {"true_anomaly", "#c93b3b"}};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  char buf[160];
  for (const PlotPoint& p : points) {
    const auto it = colors.find(p.group);
    const std::string& color = it != colors.end() ? it->second : "#888888";
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.2\" fill=\"%s\" "
                  "fill-opacity=\"0.7\"/>\n",
                  sx(p.x), sy(p.y), color.c_str());
    out << buf;
  }
  double ly = 16.0;
  for (const auto& [group, color] : colors) {
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"4\" fill=\"%s\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" "
                  "font-family=\"sans-serif\">%s</text>\n",
                  width - 130.0, ly, color.c_str(), width - 120.0, ly + 4.0,
                  group.c_str());
    out << buf;
    ly += 16.0;
  }
  out << "</svg>\n";
}

}  // namespace kka
