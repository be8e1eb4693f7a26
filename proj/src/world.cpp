#include "kka/world.hpp"

#include <stdexcept>
#include <string>

namespace kka {

namespace {

void check_spec(const WorldSpec& spec) {
  if (spec.dim == 0) throw std::invalid_argument("world: dim must be >= 1");
  if (spec.n_normal_clusters == 0) {
    throw std::invalid_argument("world: need at least one normal cluster");
  }
  if (!(spec.cluster_separation > 0.0)) {
    throw std::invalid_argument("world: cluster_separation must be > 0");
  }
  if (!(spec.cluster_std > 0.0)) {
    throw std::invalid_argument("world: cluster_std must be > 0");
  }
  if (spec.seq_len == 0) throw std::invalid_argument("world: seq_len must be >= 1");
  if (spec.samples_per_cluster == 0) {
    throw std::invalid_argument("world: samples_per_cluster must be >= 1");
  }
  const std::size_t clusters =
      spec.n_normal_clusters + spec.n_true_anomaly_clusters;
  if (spec.vocab_size < clusters + 1) {
    throw std::invalid_argument(
        "world: vocabulary of size " + std::to_string(spec.vocab_size) +
        " cannot own " + std::to_string(clusters) +
        " cluster tokens plus UNK");
  }
  // Far anomaly clusters need axis directions unused by normal clusters.
  const std::size_t far = spec.n_true_anomaly_clusters / 2;
  if (spec.n_normal_clusters + far > 2 * spec.dim) {
    throw std::invalid_argument(
        "world: not enough axis directions for the requested clusters");
  }
  if (spec.description_noise < 0.0 || spec.description_noise > 1.0) {
    throw std::invalid_argument("world: description_noise must be in [0,1]");
  }
}

// Signed axis direction: 0..d-1 are +e_i, d..2d-1 are -e_i.
Vec axis_direction(std::size_t index, std::size_t d) {
  Vec v(d, 0.0);
  v[index % d] = index < d ? 1.0 : -1.0;
  return v;
}

TokenSequence noisy_description(int cluster_token, std::size_t seq_len,
                                double noise, std::size_t vocab_size,
                                Rng& rng) {
  TokenSequence seq;
  seq.tokens.assign(seq_len, cluster_token);
  for (std::size_t i = 0; i < seq_len; ++i) {
    if (rng.uniform() < noise) {
      // Replace with any non-UNK token.
      seq.tokens[i] = 1 + static_cast<int>(rng.uniform_index(vocab_size - 1));
    }
  }
  return seq;
}

}  // namespace

World generate_world(const WorldSpec& spec) {
  check_spec(spec);
  const std::size_t d = spec.dim;
  const std::size_t n_norm = spec.n_normal_clusters;
  const std::size_t n_anom = spec.n_true_anomaly_clusters;

  World world;
  world.spec = spec;

  // Cluster centers. Near anomaly clusters sit halfway toward a normal
  // cluster; far ones live on fresh directions at double separation.
  std::vector<Vec> normal_centers(n_norm);
  for (std::size_t i = 0; i < n_norm; ++i) {
    normal_centers[i] = axis_direction(i, d);
    scale_inplace(normal_centers[i], spec.cluster_separation);
  }
  std::vector<Vec> anomaly_centers(n_anom);
  std::vector<Hardness> anomaly_regime(n_anom);
  std::size_t next_fresh_direction = n_norm;
  for (std::size_t a = 0; a < n_anom; ++a) {
    if (a % 2 == 0) {
      anomaly_centers[a] = axis_direction((a / 2) % n_norm, d);
      scale_inplace(anomaly_centers[a], 0.5 * spec.cluster_separation);
      anomaly_regime[a] = Hardness::hard;
    } else {
      anomaly_centers[a] = axis_direction(next_fresh_direction++, d);
      scale_inplace(anomaly_centers[a], 2.0 * spec.cluster_separation);
      anomaly_regime[a] = Hardness::easy;
    }
  }

  // Vocabulary: UNK, one owned token per cluster, then filler tokens with
  // seeded Gaussian prototypes.
  Rng proto_rng(derive_seed(spec.seed, "prototypes"));
  world.prototypes.prototypes = Mat(spec.vocab_size, d, 0.0);
  world.prototypes.noise_sigma = 0.05 * spec.cluster_std;
  std::vector<std::string> words(spec.vocab_size);
  words[0] = "<unk>";
  std::size_t token = 1;
  std::vector<int> normal_token(n_norm), anomaly_token(n_anom);
  for (std::size_t i = 0; i < n_norm; ++i, ++token) {
    normal_token[i] = static_cast<int>(token);
    words[token] = "normal" + std::to_string(i);
    for (std::size_t j = 0; j < d; ++j) {
      world.prototypes.prototypes(token, j) = normal_centers[i][j];
    }
  }
  for (std::size_t a = 0; a < n_anom; ++a, ++token) {
    anomaly_token[a] = static_cast<int>(token);
    words[token] = "anomaly" + std::to_string(a);
    for (std::size_t j = 0; j < d; ++j) {
      world.prototypes.prototypes(token, j) = anomaly_centers[a][j];
    }
  }
  for (; token < spec.vocab_size; ++token) {
    words[token] = "filler" + std::to_string(token);
    for (std::size_t j = 0; j < d; ++j) {
      world.prototypes.prototypes(token, j) =
          spec.cluster_separation * proto_rng.gaussian();
    }
  }
  world.lexicon = Lexicon::from_words(std::move(words));

  // Samples. Normals split 70/30 per cluster; true anomalies are test-only.
  std::uint64_t next_id = 0;
  Rng sample_rng(derive_seed(spec.seed, "samples"));
  const std::size_t train_per_cluster =
      (spec.samples_per_cluster * 7 + 9) / 10;  // ceil(0.7 n)

  for (std::size_t i = 0; i < n_norm; ++i) {
    for (std::size_t s = 0; s < spec.samples_per_cluster; ++s) {
      Sample sample;
      sample.id = next_id++;
      sample.label = Label::normal;
      sample.features.resize(d);
      for (std::size_t j = 0; j < d; ++j) {
        sample.features[j] =
            normal_centers[i][j] + spec.cluster_std * sample_rng.gaussian();
      }
      sample.description =
          noisy_description(normal_token[i], spec.seq_len,
                            spec.description_noise, spec.vocab_size, sample_rng);
      if (s < train_per_cluster) {
        world.train_normals.push_back(std::move(sample));
      } else {
        world.test_normals.push_back(std::move(sample));
      }
    }
  }
  for (std::size_t a = 0; a < n_anom; ++a) {
    for (std::size_t s = 0; s < spec.samples_per_cluster; ++s) {
      Sample sample;
      sample.id = next_id++;
      sample.label = Label::true_anomaly;
      sample.hardness = anomaly_regime[a];
      sample.features.resize(d);
      for (std::size_t j = 0; j < d; ++j) {
        sample.features[j] =
            anomaly_centers[a][j] + spec.cluster_std * sample_rng.gaussian();
      }
      sample.description =
          noisy_description(anomaly_token[a], spec.seq_len,
                            spec.description_noise, spec.vocab_size, sample_rng);
      world.test_true_anomalies.push_back(std::move(sample));
    }
  }
  return world;
}

}  // namespace kka
