#include "kka/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace kka {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read " + path.string());
  }
  return in;
}

// %.17g round-trips doubles exactly.
std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_fixed6(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

json sample_to_json(const Sample& s) {
  json j = {{"id", s.id},
            {"label", to_string(s.label)},
            {"hardness", to_string(s.hardness)},
            {"features", s.features}};
  if (s.description.has_value()) j["tokens"] = s.description->tokens;
  return j;
}

Sample sample_from_json(const json& j) {
  Sample s;
  s.id = j.at("id").get<std::uint64_t>();
  s.label = label_from_string(j.at("label").get<std::string>());
  s.hardness = hardness_from_string(j.at("hardness").get<std::string>());
  s.features = j.at("features").get<Vec>();
  if (j.contains("tokens")) {
    TokenSequence seq;
    seq.tokens = j.at("tokens").get<std::vector<int>>();
    s.description = std::move(seq);
  }
  return s;
}

void save_matrix_csv(const fs::path& path, const Mat& m) {
  std::ofstream out = open_out(path);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << fmt_double(m(r, c));
    }
    out << '\n';
  }
}

Mat load_matrix_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty matrix file " + path.string());
  Mat m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) {
      throw std::runtime_error("ragged matrix file " + path.string());
    }
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

double json_nullable(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN()
                     : j.get<double>();
}

json nullable_json(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

json record_to_json(const IterationRecord& r) {
  return {{"iteration", r.iteration},
          {"n_anomalies", r.n_anomalies},
          {"hard_count", r.hard_count},
          {"easy_count", r.easy_count},
          {"auc", nullable_json(r.auc)},
          {"auc_near", nullable_json(r.auc_near)},
          {"auc_far", nullable_json(r.auc_far)},
          {"dpo_loss_final", nullable_json(r.dpo_loss_final)},
          {"constraint_met", r.constraint_met},
          {"wall_time_s", r.wall_time_s},
          {"measured", r.measured}};
}

IterationRecord record_from_json(const json& j) {
  IterationRecord r;
  r.iteration = j.at("iteration").get<std::size_t>();
  r.n_anomalies = j.at("n_anomalies").get<std::size_t>();
  r.hard_count = j.at("hard_count").get<std::size_t>();
  r.easy_count = j.at("easy_count").get<std::size_t>();
  r.auc = json_nullable(j.at("auc"));
  r.auc_near = json_nullable(j.at("auc_near"));
  r.auc_far = json_nullable(j.at("auc_far"));
  r.dpo_loss_final = json_nullable(j.at("dpo_loss_final"));
  r.constraint_met = j.at("constraint_met").get<bool>();
  r.wall_time_s = j.at("wall_time_s").get<double>();
  r.measured = j.at("measured").get<bool>();
  return r;
}

}  // namespace

void save_samples_jsonl(const fs::path& path,
                        const std::vector<Sample>& samples) {
  std::ofstream out = open_out(path);
  for (const Sample& s : samples) out << sample_to_json(s).dump() << '\n';
}

std::vector<Sample> load_samples_jsonl(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<Sample> samples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": invalid JSON record");
    }
    samples.push_back(sample_from_json(j));
  }
  return samples;
}

void save_prototypes_csv(const fs::path& path, const PrototypeTable& table) {
  std::ofstream out = open_out(path);
  out << "# noise_sigma " << fmt_double(table.noise_sigma) << '\n';
  for (std::size_t t = 0; t < table.vocab_size(); ++t) {
    out << t;
    for (std::size_t j = 0; j < table.dim(); ++j) {
      out << ',' << fmt_double(table.prototypes(t, j));
    }
    out << '\n';
  }
}

PrototypeTable load_prototypes_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  PrototypeTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::stringstream ss(line.substr(1));
      std::string key;
      ss >> key;
      if (key == "noise_sigma") ss >> table.noise_sigma;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    bool first = true;
    std::size_t token = 0;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        token = static_cast<std::size_t>(std::stoull(cell));
        first = false;
      } else {
        row.push_back(std::stod(cell));
      }
    }
    if (token != rows.size()) {
      throw std::runtime_error(path.string() + ": token indices must be " +
                               "contiguous from 0");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw std::runtime_error(path.string() + ": no prototype rows");
  }
  table.prototypes = Mat(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      table.prototypes(r, c) = rows[r][c];
    }
  }
  return table;
}

void save_lexicon_tsv(const fs::path& path, const Lexicon& lex) {
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < lex.words.size(); ++i) {
    out << lex.words[i] << '\t' << i << '\n';
  }
}

Lexicon load_lexicon_tsv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::pair<std::string, std::size_t>> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(path.string() + ": malformed lexicon line");
    }
    entries.emplace_back(line.substr(0, tab),
                         std::stoull(line.substr(tab + 1)));
  }
  std::vector<std::string> words(entries.size());
  for (const auto& [word, idx] : entries) {
    if (idx >= words.size()) {
      throw std::runtime_error(path.string() + ": token index out of range");
    }
    words[idx] = word;
  }
  return Lexicon::from_words(std::move(words));
}

void save_world(const fs::path& dir, const World& world) {
  fs::create_directories(dir);
  save_samples_jsonl(dir / "train_normals.jsonl", world.train_normals);
  save_samples_jsonl(dir / "test_normals.jsonl", world.test_normals);
  save_samples_jsonl(dir / "test_true_anomalies.jsonl",
                     world.test_true_anomalies);
  save_prototypes_csv(dir / "prototypes.csv", world.prototypes);
  save_lexicon_tsv(dir / "lexicon.tsv", world.lexicon);
}

WorldFiles load_world(const fs::path& dir) {
  WorldFiles files;
  files.train_normals = load_samples_jsonl(dir / "train_normals.jsonl");
  files.test_normals = load_samples_jsonl(dir / "test_normals.jsonl");
  files.test_true_anomalies =
      load_samples_jsonl(dir / "test_true_anomalies.jsonl");
  files.prototypes = load_prototypes_csv(dir / "prototypes.csv");
  files.lexicon = load_lexicon_tsv(dir / "lexicon.tsv");
  return files;
}

namespace {

// Reading and writing share this table so the key set stays in sync.
void config_io(json& j, RunConfig& c, bool writing) {
  auto field = [&](const char* key, auto& value) {
    using T = std::decay_t<decltype(value)>;
    if (writing) {
      j[key] = value;
    } else if (j.contains(key)) {
      value = j.at(key).get<T>();
      j.erase(key);
    }
  };

  std::string mode = to_string(c.mode);
  field("seed", c.seed);
  field("k_clusters", c.k_clusters);
  field("n_init_anomalies", c.n_init_anomalies);
  field("n_gen_per_iter", c.n_gen_per_iter);
  field("iterations", c.iterations);
  field("mode", mode);
  field("beta", c.beta);
  field("dpo_steps", c.dpo_steps);
  field("dpo_lr", c.dpo_lr);
  field("max_pairs", c.max_pairs);
  field("evaluator_widths", c.evaluator_widths);
  field("evaluator_epochs", c.evaluator_epochs);
  field("evaluator_lr", c.evaluator_lr);
  field("batch_size", c.batch_size);
  field("weight_decay", c.weight_decay);
  field("eps_inv", c.eps_inv);
  field("quantile", c.quantile);
  field("max_retries", c.max_retries);
  field("eps_cov", c.eps_cov);
  field("temperature", c.temperature);
  field("generate_endpoint", c.generate_endpoint);
  field("render_endpoint", c.render_endpoint);
  field("world_dim", c.world.dim);
  field("world_normal_clusters", c.world.n_normal_clusters);
  field("world_anomaly_clusters", c.world.n_true_anomaly_clusters);
  field("world_cluster_std", c.world.cluster_std);
  field("world_separation", c.world.cluster_separation);
  field("world_vocab", c.world.vocab_size);
  field("world_seq_len", c.world.seq_len);
  field("world_samples_per_cluster", c.world.samples_per_cluster);
  field("world_description_noise", c.world.description_noise);
  field("world_seed", c.world.seed);
  if (!writing) c.mode = update_mode_from_string(mode);
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) {
    throw std::invalid_argument("config must be a JSON object");
  }
  RunConfig config;
  try {
    config_io(j, config, false);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config field error: ") + e.what());
  }
  if (!j.empty()) {
    std::string keys;
    for (const auto& item : j.items()) {
      if (!keys.empty()) keys += ", ";
      keys += item.key();
    }
    throw std::invalid_argument("unknown config key(s): " + keys);
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json_text(ss.str());
}

std::string run_config_to_json_text(const RunConfig& config) {
  json j = json::object();
  RunConfig copy = config;
  config_io(j, copy, true);
  return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& config) {
  const std::string canon = run_config_to_json_text(config);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

void save_checkpoint(const fs::path& dir, const RunConfig& config,
                     const CurriculumState& state, const GeneratorPolicy& policy,
                     const std::vector<Sample>& last_batch) {
  fs::create_directories(dir);
  json history = json::array();
  for (const IterationRecord& r : state.history) {
    history.push_back(record_to_json(r));
  }
  const json manifest = {{"config_hash", config_hash(config)},
                         {"iteration", state.iteration},
                         {"mode", to_string(state.mode)},
                         {"history", history},
                         {"policy",
                          {{"vocab_size", policy.vocab_size},
                           {"seq_len", policy.seq_len},
                           {"temperature", policy.temperature}}}};
  open_out(dir / "manifest.json") << manifest.dump(2) << '\n';

  Mat start(1, policy.start_logits.size());
  for (std::size_t i = 0; i < policy.start_logits.size(); ++i) {
    start(0, i) = policy.start_logits[i];
  }
  save_matrix_csv(dir / "policy_start.csv", start);
  save_matrix_csv(dir / "policy_transition.csv", policy.transition_logits);
  save_samples_jsonl(dir / "anomaly_set.jsonl", state.anomaly_set);
  save_samples_jsonl(dir / "last_batch.jsonl", last_batch);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in = open_in(dir / "manifest.json");
  json manifest;
  in >> manifest;

  Checkpoint cp;
  cp.config_hash = manifest.at("config_hash").get<std::string>();
  cp.state.iteration = manifest.at("iteration").get<std::size_t>();
  cp.state.mode =
      update_mode_from_string(manifest.at("mode").get<std::string>());
  for (const json& r : manifest.at("history")) {
    cp.state.history.push_back(record_from_json(r));
  }

  const json& pol = manifest.at("policy");
  cp.policy.vocab_size = pol.at("vocab_size").get<std::size_t>();
  cp.policy.seq_len = pol.at("seq_len").get<std::size_t>();
  cp.policy.temperature = pol.at("temperature").get<double>();
  const Mat start = load_matrix_csv(dir / "policy_start.csv");
  cp.policy.start_logits = start.data();
  cp.policy.transition_logits = load_matrix_csv(dir / "policy_transition.csv");
  if (cp.policy.start_logits.size() != cp.policy.vocab_size ||
      cp.policy.transition_logits.rows() != cp.policy.vocab_size ||
      cp.policy.transition_logits.cols() != cp.policy.vocab_size) {
    throw std::runtime_error(dir.string() + ": policy shape mismatch");
  }
  cp.state.anomaly_set = load_samples_jsonl(dir / "anomaly_set.jsonl");
  cp.last_batch = load_samples_jsonl(dir / "last_batch.jsonl");
  return cp;
}

void save_detector(const fs::path& dir, const ConfusionEvaluator& detector) {
  if (!detector.center.has_value()) {
    throw std::invalid_argument("save_detector: center not set");
  }
  fs::create_directories(dir);
  const json manifest = {{"n_layers", detector.layers.size()},
                         {"center", *detector.center},
                         {"weight_decay", detector.weight_decay},
                         {"eps_inv", detector.eps_inv}};
  open_out(dir / "manifest.json") << manifest.dump(2) << '\n';
  for (std::size_t l = 0; l < detector.layers.size(); ++l) {
    save_matrix_csv(dir / ("layer_" + std::to_string(l) + ".csv"),
                    detector.layers[l]);
  }
}

ConfusionEvaluator load_detector(const fs::path& dir) {
  std::ifstream in = open_in(dir / "manifest.json");
  json manifest;
  in >> manifest;

  ConfusionEvaluator ev;
  ev.weight_decay = manifest.at("weight_decay").get<double>();
  ev.eps_inv = manifest.at("eps_inv").get<double>();
  const std::size_t n_layers = manifest.at("n_layers").get<std::size_t>();
  for (std::size_t l = 0; l < n_layers; ++l) {
    ev.layers.push_back(
        load_matrix_csv(dir / ("layer_" + std::to_string(l) + ".csv")));
  }
  ev.center = manifest.at("center").get<Vec>();
  if (ev.center->size() != ev.output_dim()) {
    throw std::runtime_error(dir.string() + ": center dimension mismatch");
  }
  return ev;
}

void save_report_csv(const fs::path& path,
                     const std::vector<IterationRecord>& rows) {
  std::ofstream out = open_out(path);
  out << "iteration,n_anomalies,hard_count,easy_count,hard_fraction,auc,"
         "auc_near,auc_far,dpo_loss_final,constraint_met\n";
  for (const IterationRecord& r : rows) {
    out << r.iteration << ',' << r.n_anomalies << ',' << r.hard_count << ','
        << r.easy_count << ',' << fmt_fixed6(r.hard_fraction()) << ','
        << fmt_fixed6(r.auc) << ',' << fmt_fixed6(r.auc_near) << ','
        << fmt_fixed6(r.auc_far) << ',' << fmt_fixed6(r.dpo_loss_final) << ','
        << (r.constraint_met ? 1 : 0) << '\n';
  }
}

std::vector<IterationRecord> load_report_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<IterationRecord> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) {
      throw std::runtime_error(path.string() + ": malformed report row");
    }
    auto num = [](const std::string& s) {
      return s == "nan" ? std::numeric_limits<double>::quiet_NaN()
                        : std::stod(s);
    };
    IterationRecord r;
    r.iteration = std::stoull(cells[0]);
    r.n_anomalies = std::stoull(cells[1]);
    r.hard_count = std::stoull(cells[2]);
    r.easy_count = std::stoull(cells[3]);
    r.auc = num(cells[5]);
    r.auc_near = num(cells[6]);
    r.auc_far = num(cells[7]);
    r.dpo_loss_final = num(cells[8]);
    r.constraint_met = cells[9] == "1";
    r.measured = true;
    rows.push_back(r);
  }
  return rows;
}

void save_timings_csv(const fs::path& path,
                      const std::vector<IterationRecord>& rows) {
  std::ofstream out = open_out(path);
  out << "iteration,wall_time_s\n";
  for (const IterationRecord& r : rows) {
    out << r.iteration << ',' << fmt_fixed6(r.wall_time_s) << '\n';
  }
}

void save_summary_json(const fs::path& path, const RunConfig& config,
                       double final_auc) {
  const json summary = {{"final_auc", final_auc},
                        {"seed", config.seed},
                        {"config_hash", config_hash(config)}};
  open_out(path) << summary.dump(2) << '\n';
}

void save_curve_csv(const fs::path& path,
                    const std::vector<EpochPoint>& curve) {
  std::ofstream out = open_out(path);
  out << "epoch,loss,auc\n";
  for (const EpochPoint& p : curve) {
    out << p.epoch << ',' << fmt_fixed6(p.loss) << ',' << fmt_fixed6(p.auc)
        << '\n';
  }
}

}  // namespace kka
