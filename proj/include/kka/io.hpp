#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kka/curriculum.hpp"
#include "kka/lexicon.hpp"
#include "kka/renderer.hpp"
#include "kka/types.hpp"
#include "kka/world.hpp"

namespace kka {

// Dataset files are line-delimited JSON records with fields id, label,
// hardness, features and (when present) tokens.
void save_samples_jsonl(const std::filesystem::path& path,
                        const std::vector<Sample>& samples);
std::vector<Sample> load_samples_jsonl(const std::filesystem::path& path);

// token_index,v1,...,vd per line, preceded by a "# noise_sigma <x>" comment.
void save_prototypes_csv(const std::filesystem::path& path,
                         const PrototypeTable& table);
PrototypeTable load_prototypes_csv(const std::filesystem::path& path);

// word<TAB>token_index per line.
void save_lexicon_tsv(const std::filesystem::path& path, const Lexicon& lex);
Lexicon load_lexicon_tsv(const std::filesystem::path& path);

struct WorldFiles {
  std::vector<Sample> train_normals;
  std::vector<Sample> test_normals;
  std::vector<Sample> test_true_anomalies;
  PrototypeTable prototypes;
  Lexicon lexicon;
};
void save_world(const std::filesystem::path& dir, const World& world);
WorldFiles load_world(const std::filesystem::path& dir);

// Flat JSON config. Unknown keys and malformed values are errors.
RunConfig run_config_from_json_text(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json_text(const RunConfig& config);
// FNV-1a over the canonical serialization; stable across round-trips.
std::string config_hash(const RunConfig& config);

// Checkpoint directory: manifest.json (state, history, policy metadata,
// config hash), policy_*.csv, anomaly_set.jsonl, last_batch.jsonl.
void save_checkpoint(const std::filesystem::path& dir, const RunConfig& config,
                     const CurriculumState& state, const GeneratorPolicy& policy,
                     const std::vector<Sample>& last_batch);
struct Checkpoint {
  CurriculumState state;
  GeneratorPolicy policy;
  std::vector<Sample> last_batch;
  std::string config_hash;
};
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Detector directory: manifest.json plus one CSV matrix per layer.
void save_detector(const std::filesystem::path& dir,
                   const ConfusionEvaluator& detector);
ConfusionEvaluator load_detector(const std::filesystem::path& dir);

// report.csv holds the deterministic per-iteration metrics at fixed
// 6-decimal formatting; wall times live in timings.csv.
void save_report_csv(const std::filesystem::path& path,
                     const std::vector<IterationRecord>& rows);
std::vector<IterationRecord> load_report_csv(const std::filesystem::path& path);
void save_timings_csv(const std::filesystem::path& path,
                      const std::vector<IterationRecord>& rows);
void save_summary_json(const std::filesystem::path& path,
                       const RunConfig& config, double final_auc);
void save_curve_csv(const std::filesystem::path& path,
                    const std::vector<EpochPoint>& curve);

}  // namespace kka
