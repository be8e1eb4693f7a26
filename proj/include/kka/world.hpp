#pragma once

#include <cstdint>
#include <vector>

#include "kka/lexicon.hpp"
#include "kka/renderer.hpp"
#include "kka/types.hpp"

namespace kka {

// Synthetic ground truth: Gaussian normal clusters on axis directions, true
// anomaly clusters alternating between a near shell (half separation, the
// hard regime) and a far shell (double separation, the easy regime), and a
// token vocabulary whose prototypes realize the text-to-feature link.
struct WorldSpec {
  std::size_t dim = 8;
  std::size_t n_normal_clusters = 3;
  std::size_t n_true_anomaly_clusters = 4;
  double cluster_std = 0.5;
  double cluster_separation = 3.0;
  std::size_t vocab_size = 24;
  std::size_t seq_len = 4;
  std::size_t samples_per_cluster = 200;
  double description_noise = 0.1;  // per-position token corruption rate
  std::uint64_t seed = 1;

  bool operator==(const WorldSpec&) const = default;
};

struct World {
  WorldSpec spec;
  std::vector<Sample> train_normals;
  std::vector<Sample> test_normals;
  std::vector<Sample> test_true_anomalies;  // hardness: hard=near, easy=far
  PrototypeTable prototypes;
  Lexicon lexicon;
};

World generate_world(const WorldSpec& spec);

}  // namespace kka
