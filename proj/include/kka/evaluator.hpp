#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "kka/linalg.hpp"
#include "kka/types.hpp"

namespace kka {

// Bias-free MLP (tanh hidden units, linear output) mapping features into an
// embedding space with a fixed hypersphere center. Normals are pulled to the
// center, anomalies pushed away. The same trained object doubles as the
// detector: distance to the center is the anomaly score.
struct ConfusionEvaluator {
  std::vector<Mat> layers;  // layers[l] has shape widths[l] x widths[l-1]
  std::optional<Vec> center;
  double weight_decay = 1e-4;  // lambda
  double eps_inv = 1e-6;       // stabilizer inside the reciprocal anomaly term

  std::size_t input_dim() const {
    return layers.empty() ? 0 : layers.front().cols();
  }
  std::size_t output_dim() const {
    return layers.empty() ? 0 : layers.back().rows();
  }

  Vec embed(const Vec& x) const;

  bool operator==(const ConfusionEvaluator&) const = default;
};

// Training sample: features plus label, +1 normal / -1 anomaly.
struct LabeledVec {
  Vec x;
  int label = 1;
};

ConfusionEvaluator init_evaluator(std::size_t d,
                                  const std::vector<std::size_t>& widths,
                                  std::uint64_t seed,
                                  double weight_decay = 1e-4,
                                  double eps_inv = 1e-6);

// center = mean embedding of the normals, coordinates snapped away from zero
// (|c_i| >= 0.1) so the all-zero-weights map cannot collapse the sphere.
// The center is immutable afterwards.
void set_center(ConfusionEvaluator& ev, const std::vector<Vec>& normals);

// mean over samples of (||emb(x)-c||^2)^label  +  (lambda/2) * sum ||W||_F^2
// where the label -1 branch is 1/(dist^2 + eps_inv).
double sad_loss(const ConfusionEvaluator& ev,
                const std::vector<LabeledVec>& samples);

// Analytic gradient of sad_loss with respect to every layer.
std::vector<Mat> sad_loss_gradient(const ConfusionEvaluator& ev,
                                   const std::vector<LabeledVec>& samples);

using EpochObserver =
    std::function<void(std::size_t epoch, double loss,
                       const ConfusionEvaluator& ev)>;

struct TrainResult {
  ConfusionEvaluator evaluator;
  std::vector<double> loss_curve;  // full-set loss after each epoch
  bool loss_increased = false;     // final > initial; warning already logged
};

// Mini-batch Adam (beta1=0.9, beta2=0.999) on sad_loss. The anomaly set may
// be empty (pure one-class mode). Aborts on non-finite loss.
TrainResult train_evaluator(const ConfusionEvaluator& ev,
                            const std::vector<Vec>& normals,
                            const std::vector<Vec>& anomalies,
                            std::size_t epochs, double lr, std::uint64_t seed,
                            std::size_t batch_size = 32,
                            const EpochObserver& on_epoch = nullptr);

double evaluator_distance(const ConfusionEvaluator& ev, const Vec& x);

struct HardnessPartition {
  std::vector<Sample> hard;
  std::vector<Sample> easy;
  double threshold = 0.0;
  std::vector<double> distances;  // aligned with the input anomaly order
};

// threshold = quantile-q of the normal distances (q = 1.0 is the max);
// an anomaly is hard iff its distance is strictly below the threshold.
HardnessPartition partition_hardness(const ConfusionEvaluator& ev,
                                     const std::vector<Sample>& anomalies,
                                     const std::vector<Sample>& normals,
                                     double quantile = 1.0);

}  // namespace kka
