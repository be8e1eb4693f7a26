#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kka/evaluator.hpp"
#include "kka/policy.hpp"
#include "kka/scoring.hpp"
#include "kka/world.hpp"

namespace kka {

// Anomaly-set update modes: add appends new hard anomalies, rep replaces
// easy members at constant set size.
enum class UpdateMode { add, rep };
std::string to_string(UpdateMode mode);
UpdateMode update_mode_from_string(const std::string& s);

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t n_anomalies = 0;
  std::size_t hard_count = 0;
  std::size_t easy_count = 0;
  double auc = 0.0;
  double auc_near = 0.0;
  double auc_far = 0.0;
  double dpo_loss_final = 0.0;  // NaN when no fine-tune happened
  bool constraint_met = true;
  double wall_time_s = 0.0;
  // Counts and AUC are filled once a detector has been trained on the set
  // this row describes.
  bool measured = false;

  double hard_fraction() const {
    const std::size_t total = hard_count + easy_count;
    return total == 0 ? 0.0
                      : static_cast<double>(hard_count) /
                            static_cast<double>(total);
  }
};

struct CurriculumState {
  std::vector<Sample> anomaly_set;
  std::size_t iteration = 0;
  UpdateMode mode = UpdateMode::rep;
  std::vector<IterationRecord> history;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t k_clusters = 3;
  std::size_t n_init_anomalies = 200;
  std::size_t n_gen_per_iter = 0;  // 0 = same as n_init_anomalies
  std::size_t iterations = 3;
  UpdateMode mode = UpdateMode::rep;
  double beta = 0.1;
  std::size_t dpo_steps = 500;
  double dpo_lr = 1e-2;
  std::size_t max_pairs = 64;
  std::vector<std::size_t> evaluator_widths{32, 16};
  std::size_t evaluator_epochs = 150;
  double evaluator_lr = 1e-4;
  std::size_t batch_size = 32;
  double weight_decay = 1e-4;
  double eps_inv = 1e-6;
  double quantile = 1.0;
  std::size_t max_retries = 5;
  double eps_cov = 1e-3;
  double temperature = 1.0;
  WorldSpec world;
  std::string generate_endpoint;  // optional external text generator
  std::string render_endpoint;    // optional external feature renderer

  std::size_t gen_per_iter() const {
    return n_gen_per_iter != 0 ? n_gen_per_iter : n_init_anomalies;
  }
  void validate() const;  // throws std::invalid_argument

  bool operator==(const RunConfig&) const = default;
};

// Pairs each hard anomaly with a seeded-random easy one, cycling the
// representatives as prompts. Degenerate inputs yield an empty list with a
// warning.
std::vector<PreferencePair> build_preference_pairs(
    const std::vector<Sample>& representatives,
    const HardnessPartition& partition, std::size_t max_pairs,
    std::uint64_t seed);

// add: append the hard members of new_samples. rep: overwrite seeded-random
// easy members of the current set with them, count preserved, surplus
// discarded. Increments the iteration and appends the record.
CurriculumState update_anomaly_set(const CurriculumState& state,
                                   const std::vector<Sample>& new_samples,
                                   const HardnessPartition& partition_of_new,
                                   IterationRecord record, std::uint64_t seed);

struct EpochPoint {
  std::size_t epoch = 0;
  double loss = 0.0;
  double auc = 0.0;
};

struct RunResult {
  CurriculumState state;
  ConfusionEvaluator detector;
  GeneratorPolicy policy;
  std::vector<Sample> last_batch;
  std::vector<std::string> stage_log;
  std::vector<EpochPoint> detector_curve;  // final detector training curve
};

struct ResumePoint {
  CurriculumState state;
  GeneratorPolicy policy;
  std::vector<Sample> last_batch;
};

using CheckpointHook = std::function<void(
    const CurriculumState&, const GeneratorPolicy&, const std::vector<Sample>&)>;

// The full curriculum: select representatives, generate the initial anomaly
// set, then per iteration train the confusion evaluator, partition hardness,
// preference-fine-tune the generator and update the anomaly set. Returns the
// final state together with a detector trained on the final set.
// Deterministic given config.seed when no external endpoints are configured.
RunResult run_kka(const RunConfig& config, const ResumePoint* resume = nullptr,
                  const CheckpointHook& on_checkpoint = nullptr);

}  // namespace kka
