#include "kka/curriculum.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "kka/http.hpp"

namespace kka {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

const TokenSequence& description_of(const Sample& s, const char* role) {
  if (!s.description.has_value()) {
    throw std::invalid_argument(std::string("build_preference_pairs: ") + role +
                                " sample " + std::to_string(s.id) +
                                " has no description");
  }
  return *s.description;
}

// HTTP-backed renderer; detokenizes against the world lexicon.
class ExternalRenderer final : public Renderer {
 public:
  ExternalRenderer(HttpClientConfig config, const Lexicon& lexicon)
      : config_(std::move(config)), lexicon_(lexicon) {}

  Vec render_tokens(const TokenSequence& seq,
                    std::uint64_t /*seed*/) const override {
    return external_render(config_, detokenize(lexicon_, seq));
  }
  std::size_t feature_dim() const override { return config_.expected_dim; }

 private:
  HttpClientConfig config_;
  const Lexicon& lexicon_;
};

struct AucTriple {
  double combined = kNaN;
  double near = kNaN;
  double far = kNaN;
};

AucTriple held_out_auc(const ConfusionEvaluator& detector, const World& world) {
  std::vector<double> normal_scores;
  normal_scores.reserve(world.test_normals.size());
  for (const Sample& s : world.test_normals) {
    normal_scores.push_back(evaluator_distance(detector, s.features));
  }

  auto auc_against = [&](const std::vector<double>& anomaly_scores) {
    if (anomaly_scores.empty() || normal_scores.empty()) return kNaN;
    std::vector<double> scores = normal_scores;
    std::vector<int> labels(normal_scores.size(), 0);
    scores.insert(scores.end(), anomaly_scores.begin(), anomaly_scores.end());
    labels.insert(labels.end(), anomaly_scores.size(), 1);
    return roc_auc(scores, labels);
  };

  std::vector<double> all, near, far;
  for (const Sample& s : world.test_true_anomalies) {
    const double d = evaluator_distance(detector, s.features);
    all.push_back(d);
    (s.hardness == Hardness::hard ? near : far).push_back(d);
  }

  AucTriple out;
  out.combined = auc_against(all);
  out.near = auc_against(near);
  out.far = auc_against(far);
  return out;
}

}  // namespace

std::string to_string(UpdateMode mode) {
  return mode == UpdateMode::add ? "add" : "rep";
}

UpdateMode update_mode_from_string(const std::string& s) {
  if (s == "add") return UpdateMode::add;
  if (s == "rep") return UpdateMode::rep;
  throw std::invalid_argument("unknown update mode: " + s);
}

void RunConfig::validate() const {
  if (k_clusters == 0) throw std::invalid_argument("k_clusters must be >= 1");
  if (n_init_anomalies == 0) {
    throw std::invalid_argument("n_init_anomalies must be >= 1");
  }
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  if (!(quantile > 0.0) || quantile > 1.0) {
    throw std::invalid_argument("quantile must be in (0, 1]");
  }
  if (max_retries == 0) throw std::invalid_argument("max_retries must be >= 1");
  if (evaluator_widths.empty()) {
    throw std::invalid_argument("evaluator_widths must be non-empty");
  }
  for (std::size_t w : evaluator_widths) {
    if (w == 0) throw std::invalid_argument("evaluator_widths entries must be >= 1");
  }
  if (evaluator_epochs == 0) {
    throw std::invalid_argument("evaluator_epochs must be >= 1");
  }
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (!(weight_decay > 0.0)) {
    throw std::invalid_argument("weight_decay must be > 0");
  }
  if (!(eps_cov > 0.0)) throw std::invalid_argument("eps_cov must be > 0");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (max_pairs == 0) throw std::invalid_argument("max_pairs must be >= 1");
}

std::vector<PreferencePair> build_preference_pairs(
    const std::vector<Sample>& representatives,
    const HardnessPartition& partition, std::size_t max_pairs,
    std::uint64_t seed) {
  std::vector<PreferencePair> pairs;
  if (representatives.empty()) {
    log_warn("build_preference_pairs: no representatives, no pairs built");
    return pairs;
  }
  if (partition.hard.empty() || partition.easy.empty()) {
    log_warn("build_preference_pairs: need at least one hard and one easy "
             "anomaly (" +
             std::to_string(partition.hard.size()) + " hard, " +
             std::to_string(partition.easy.size()) + " easy)");
    return pairs;
  }

  Rng rng(seed);
  for (std::size_t i = 0; i < partition.hard.size() && pairs.size() < max_pairs;
       ++i) {
    const Sample& hard = partition.hard[i];
    const TokenSequence& preferred = description_of(hard, "hard");

    const Sample* easy = nullptr;
    for (int tries = 0; tries < 16; ++tries) {
      const Sample& candidate =
          partition.easy[rng.uniform_index(partition.easy.size())];
      if (description_of(candidate, "easy") != preferred) {
        easy = &candidate;
        break;
      }
    }
    if (easy == nullptr) continue;  // every easy description equals this one

    PreferencePair pair;
    pair.prompt =
        description_of(representatives[i % representatives.size()], "prompt");
    pair.preferred = preferred;
    pair.rejected = *easy->description;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

CurriculumState update_anomaly_set(const CurriculumState& state,
                                   const std::vector<Sample>& new_samples,
                                   const HardnessPartition& partition_of_new,
                                   IterationRecord record, std::uint64_t seed) {
  (void)new_samples;  // the update consumes the partition's hard members
  CurriculumState out = state;

  const std::vector<Sample>& incoming = partition_of_new.hard;
  if (out.mode == UpdateMode::add) {
    out.anomaly_set.insert(out.anomaly_set.end(), incoming.begin(),
                           incoming.end());
  } else {
    std::vector<std::size_t> easy_slots;
    for (std::size_t i = 0; i < out.anomaly_set.size(); ++i) {
      if (out.anomaly_set[i].hardness == Hardness::easy) easy_slots.push_back(i);
    }
    Rng rng(seed);
    rng.shuffle(easy_slots);
    const std::size_t m = std::min(easy_slots.size(), incoming.size());
    for (std::size_t i = 0; i < m; ++i) {
      out.anomaly_set[easy_slots[i]] = incoming[i];
    }
    if (incoming.size() > m) {
      log_info("update_anomaly_set: discarded " +
               std::to_string(incoming.size() - m) +
               " surplus hard anomalies (only " + std::to_string(m) +
               " easy slots)");
    }
  }

  out.iteration += 1;
  record.iteration = out.iteration;
  record.n_anomalies = out.anomaly_set.size();
  out.history.push_back(std::move(record));
  return out;
}

RunResult run_kka(const RunConfig& config, const ResumePoint* resume,
                  const CheckpointHook& on_checkpoint) {
  config.validate();
  RunResult result;
  std::vector<std::string>& stages = result.stage_log;

  auto run_stage = [&stages](std::size_t iteration, const char* name,
                             auto&& body) {
    stages.push_back(name);
    log_info("iteration " + std::to_string(iteration) + ": " + name);
    try {
      return body();
    } catch (const std::exception& e) {
      throw std::runtime_error("iteration " + std::to_string(iteration) +
                               ", stage " + name + ": " + e.what());
    }
  };

  // Fixed world and scoring fixtures, regenerated deterministically so that
  // checkpoints only need to carry the evolving state.
  const World world = generate_world(config.world);
  const std::size_t d = config.world.dim;
  const std::vector<Vec> train_features = features_of(world.train_normals);

  const ClusterModel cluster_model =
      fit_cluster_model(train_features, config.k_clusters,
                        derive_seed(config.seed, "fit"), config.eps_cov);

  const bool external_generation = !config.generate_endpoint.empty();
  PrototypeRenderer prototype_renderer(world.prototypes);
  std::unique_ptr<ExternalRenderer> external_renderer;
  if (!config.render_endpoint.empty()) {
    HttpClientConfig rcfg;
    rcfg.base_url = config.render_endpoint;
    rcfg.expected_dim = d;
    external_renderer =
        std::make_unique<ExternalRenderer>(std::move(rcfg), world.lexicon);
  }
  const Renderer& renderer =
      external_renderer ? static_cast<const Renderer&>(*external_renderer)
                        : static_cast<const Renderer&>(prototype_renderer);

  const GeneratorPolicy reference_policy = make_uniform_policy(
      config.world.vocab_size, config.world.seq_len, config.temperature);

  std::uint64_t world_id_count = world.train_normals.size() +
                                 world.test_normals.size() +
                                 world.test_true_anomalies.size();
  auto batch_id_start = [&](std::size_t iteration) {
    return world_id_count + (iteration == 0
                                 ? 0
                                 : config.n_init_anomalies +
                                       (iteration - 1) * config.gen_per_iter());
  };

  // Representatives are needed for prompts in every iteration; their final
  // tokens seed the Markov context of every conditioned generation.
  std::vector<Sample> representatives;
  std::vector<int> prompt_contexts;
  run_stage(0, "select_representatives", [&] {
    representatives = select_representatives(cluster_model, world.train_normals);
    for (const Sample& rep : representatives) {
      prompt_contexts.push_back(rep.description->tokens.back());
    }
    return 0;
  });

  CurriculumState state;
  GeneratorPolicy policy = reference_policy;
  std::vector<Sample>& last_batch = result.last_batch;

  auto external_sequences = [&](std::size_t n, std::size_t iteration) {
    HttpClientConfig gcfg;
    gcfg.base_url = config.generate_endpoint;
    std::string prompt;
    for (const Sample& rep : representatives) {
      if (!prompt.empty()) prompt += "\n";
      prompt += detokenize(world.lexicon, *rep.description);
    }
    const GenerateResult gen = external_generate(
        gcfg, prompt, n, config.world.seq_len, config.temperature);
    std::vector<TokenSequence> seqs;
    seqs.reserve(gen.completions.size());
    for (const std::string& text : gen.completions) {
      seqs.push_back(tokenize(world.lexicon, text, config.world.seq_len));
    }
    if (seqs.empty()) {
      throw std::runtime_error("external generator returned no completions at "
                               "iteration " +
                               std::to_string(iteration));
    }
    return seqs;
  };

  if (resume != nullptr) {
    state = resume->state;
    policy = resume->policy;
    last_batch = resume->last_batch;
    log_info("resuming at iteration " + std::to_string(state.iteration));
  } else {
    state.mode = config.mode;
    const auto t0 = std::chrono::steady_clock::now();
    run_stage(0, "generate_initial", [&] {
      const std::vector<TokenSequence> seqs =
          external_generation
              ? external_sequences(config.n_init_anomalies, 0)
              : sample_sequence_given(policy, prompt_contexts,
                                      derive_seed(config.seed, "gen", 0),
                                      config.n_init_anomalies);
      std::vector<Sample> batch;
      batch.reserve(seqs.size());
      const std::uint64_t id0 = batch_id_start(0);
      for (std::size_t i = 0; i < seqs.size(); ++i) {
        Sample s;
        s.id = id0 + i;
        s.label = Label::generated_anomaly;
        s.description = seqs[i];
        s.features = renderer.render_tokens(
            seqs[i], derive_seed(config.seed, "render0", i));
        batch.push_back(std::move(s));
      }
      state.anomaly_set = batch;
      last_batch = std::move(batch);
      return 0;
    });

    IterationRecord first;
    first.iteration = 0;
    first.n_anomalies = state.anomaly_set.size();
    first.dpo_loss_final = kNaN;
    first.constraint_met = true;
    first.wall_time_s = seconds_since(t0);
    state.history.push_back(first);

    if (on_checkpoint) on_checkpoint(state, policy, last_batch);
  }

  // Trains a detector on the current anomaly set and completes the history
  // row describing it.
  auto measure_current_set = [&](std::size_t set_index,
                                 const EpochObserver& observer)
      -> std::pair<ConfusionEvaluator, HardnessPartition> {
    ConfusionEvaluator ev = init_evaluator(
        d, config.evaluator_widths, derive_seed(config.seed, "eval", set_index),
        config.weight_decay, config.eps_inv);
    set_center(ev, train_features);
    TrainResult trained = train_evaluator(
        ev, train_features, features_of(state.anomaly_set),
        config.evaluator_epochs, config.evaluator_lr,
        derive_seed(config.seed, "eval_train", set_index), config.batch_size,
        observer);
    HardnessPartition part =
        partition_hardness(trained.evaluator, state.anomaly_set,
                           world.train_normals, config.quantile);

    IterationRecord& row = state.history.at(set_index);
    row.hard_count = part.hard.size();
    row.easy_count = part.easy.size();
    const AucTriple aucs = held_out_auc(trained.evaluator, world);
    row.auc = aucs.combined;
    row.auc_near = aucs.near;
    row.auc_far = aucs.far;
    row.measured = true;
    return {std::move(trained.evaluator), std::move(part)};
  };

  for (std::size_t j = state.iteration + 1; j <= config.iterations; ++j) {
    const auto t0 = std::chrono::steady_clock::now();

    auto [evaluator, partition] =
        run_stage(j, "train_evaluator", [&] { return measure_current_set(j - 1, nullptr); });

    run_stage(j, "select_hard", [&] {
      // Tag the live set with the partition's hardness labels so the rep
      // update can find replaceable members.
      for (std::size_t i = 0; i < state.anomaly_set.size(); ++i) {
        state.anomaly_set[i].hardness =
            partition.distances[i] < partition.threshold ? Hardness::hard
                                                         : Hardness::easy;
      }
      return 0;
    });

    double dpo_final = kNaN;
    run_stage(j, "finetune_policy", [&] {
      if (external_generation) {
        log_info("external generator configured; preference fine-tuning "
                 "skipped");
        return 0;
      }
      const std::vector<PreferencePair> pairs = build_preference_pairs(
          representatives, partition, config.max_pairs,
          derive_seed(config.seed, "pairs", j));
      if (pairs.empty()) {
        log_warn("iteration " + std::to_string(j) +
                 ": no preference pairs, policy unchanged");
        return 0;
      }
      policy = dpo_finetune_from(reference_policy, policy, pairs, config.beta,
                                 config.dpo_steps, config.dpo_lr);
      dpo_final = dpo_loss(policy, reference_policy, pairs, config.beta);
      return 0;
    });

    run_stage(j, "update_anomaly_set", [&] {
      // The previous batch's hard count under the current evaluator is the
      // bar the fresh generation has to clear.
      const long prev_hard = static_cast<long>(
          partition_hardness(evaluator, last_batch, world.train_normals,
                             config.quantile)
              .hard.size());

      GenerationResult gen;
      if (external_generation) {
        gen = [&] {
          GenerationResult best;
          long best_hard = -1;
          for (std::size_t attempt = 0; attempt < config.max_retries;
               ++attempt) {
            const std::vector<TokenSequence> seqs =
                external_sequences(config.gen_per_iter(), j);
            std::vector<Sample> batch;
            for (std::size_t i = 0; i < seqs.size(); ++i) {
              Sample s;
              s.label = Label::generated_anomaly;
              s.description = seqs[i];
              s.features = renderer.render_tokens(
                  seqs[i], derive_seed(config.seed, "render", j * 1000 + i));
              batch.push_back(std::move(s));
            }
            const HardnessPartition p = partition_hardness(
                evaluator, batch, world.train_normals, config.quantile);
            const long hard = static_cast<long>(p.hard.size());
            if (hard > best_hard) {
              best_hard = hard;
              for (std::size_t i = 0; i < batch.size(); ++i) {
                batch[i].hardness = p.distances[i] < p.threshold
                                        ? Hardness::hard
                                        : Hardness::easy;
              }
              best.samples = batch;
              best.hard_count = static_cast<std::size_t>(hard);
            }
            best.attempts = attempt + 1;
            if (hard > prev_hard) {
              best.constraint_met = true;
              break;
            }
          }
          const std::uint64_t id0 = batch_id_start(j);
          for (std::size_t i = 0; i < best.samples.size(); ++i) {
            best.samples[i].id = id0 + i;
          }
          return best;
        }();
      } else {
        gen = generate_with_hard_constraint(
            policy, renderer, evaluator, world.train_normals,
            config.gen_per_iter(), prev_hard, config.max_retries,
            derive_seed(config.seed, "gen", j), config.quantile,
            batch_id_start(j), prompt_contexts);
      }

      const HardnessPartition new_partition = partition_hardness(
          evaluator, gen.samples, world.train_normals, config.quantile);

      IterationRecord record;
      record.iteration = j;
      record.dpo_loss_final = dpo_final;
      record.constraint_met = gen.constraint_met;
      record.wall_time_s = seconds_since(t0);
      state = update_anomaly_set(state, gen.samples, new_partition, record,
                                 derive_seed(config.seed, "update", j));
      last_batch = gen.samples;
      return 0;
    });

    if (on_checkpoint) on_checkpoint(state, policy, last_batch);
  }

  // Final detector on the final set, with a convergence curve.
  run_stage(config.iterations, "train_final_detector", [&] {
    const EpochObserver observer = [&](std::size_t epoch, double loss,
                                       const ConfusionEvaluator& ev) {
      EpochPoint point;
      point.epoch = epoch;
      point.loss = loss;
      point.auc = held_out_auc(ev, world).combined;
      result.detector_curve.push_back(point);
    };
    auto [detector, partition] =
        measure_current_set(config.iterations, observer);
    result.detector = std::move(detector);
    (void)partition;
    return 0;
  });

  result.state = std::move(state);
  result.policy = std::move(policy);
  return result;
}

}  // namespace kka
