#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kka/curriculum.hpp"
#include "kka/io.hpp"
#include "kka/pca.hpp"
#include "kka/world.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Thrown by the checkpoint hook to honor --stop-after.
struct StopRequested {};

// Exclusive lock on an output directory, released on scope exit.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".kka_lock") {
    fs::create_directories(dir);
    if (fs::exists(path_)) {
      throw std::runtime_error("output directory is locked by " +
                               path_.string() +
                               " (remove it if no run is active)");
    }
    std::ofstream out(path_);
    out << "locked\n";
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

bool dir_nonempty(const fs::path& dir) {
  return fs::exists(dir) && fs::is_directory(dir) &&
         fs::directory_iterator(dir) != fs::directory_iterator();
}

std::string iter_dir_name(std::size_t iteration) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "iter_%03zu", iteration);
  return buf;
}

std::optional<fs::path> latest_checkpoint(const fs::path& checkpoints) {
  if (!fs::exists(checkpoints)) return std::nullopt;
  std::optional<fs::path> best;
  for (const auto& entry : fs::directory_iterator(checkpoints)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("iter_", 0) != 0) continue;
    if (!best || name > best->filename().string()) best = entry.path();
  }
  return best;
}

struct GenWorldArgs {
  std::string out;
  std::uint64_t seed = 1;
  bool force = false;
  std::string config;
};

int cmd_gen_world(const GenWorldArgs& args) {
  kka::WorldSpec spec;
  if (!args.config.empty()) {
    spec = kka::load_run_config(args.config).world;
  }
  spec.seed = args.seed;

  const fs::path out(args.out);
  if (dir_nonempty(out) && !args.force) {
    std::cerr << "refusing to write into non-empty directory " << out
              << " (use --force)\n";
    return kExitRuntime;
  }
  const kka::World world = kka::generate_world(spec);
  kka::save_world(out, world);
  std::cout << "world written to " << out.string() << "\n"
            << "  train normals:       " << world.train_normals.size() << "\n"
            << "  test normals:        " << world.test_normals.size() << "\n"
            << "  test true anomalies: " << world.test_true_anomalies.size()
            << "\n"
            << "  vocabulary:          " << world.lexicon.size() << "\n";
  return kExitOk;
}

struct RunArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool resume = false;
  bool force = false;
  long stop_after = -1;  // stop after writing this iteration's checkpoint
};

int cmd_run(const RunArgs& args) {
  kka::RunConfig config = kka::load_run_config(args.config);
  if (args.seed.has_value()) config.seed = *args.seed;

  const fs::path out(args.out);
  const fs::path checkpoints = out / "checkpoints";
  if (!args.resume && dir_nonempty(checkpoints) && !args.force) {
    std::cerr << "refusing to overwrite checkpoints in " << out.string()
              << " (use --resume or --force)\n";
    return kExitRuntime;
  }

  DirLock lock(out);
  const std::string hash = kka::config_hash(config);

  kka::ResumePoint resume_point;
  const kka::ResumePoint* resume = nullptr;
  if (args.resume) {
    const auto latest = latest_checkpoint(checkpoints);
    if (!latest) {
      std::cerr << "--resume requested but no checkpoint found under "
                << checkpoints.string() << "\n";
      return kExitRuntime;
    }
    kka::Checkpoint cp = kka::load_checkpoint(*latest);
    if (cp.config_hash != hash) {
      std::cerr << "checkpoint " << latest->string()
                << " was produced by a different config (hash " << cp.config_hash
                << " vs " << hash << ")\n";
      return kExitRuntime;
    }
    resume_point.state = std::move(cp.state);
    resume_point.policy = std::move(cp.policy);
    resume_point.last_batch = std::move(cp.last_batch);
    resume = &resume_point;
    std::cout << "resuming from " << latest->string() << "\n";
  }

  bool stopped_early = false;
  const kka::CheckpointHook hook =
      [&](const kka::CurriculumState& state, const kka::GeneratorPolicy& policy,
          const std::vector<kka::Sample>& last_batch) {
        kka::save_checkpoint(checkpoints / iter_dir_name(state.iteration),
                             config, state, policy, last_batch);
        if (args.stop_after >= 0 &&
            state.iteration >= static_cast<std::size_t>(args.stop_after)) {
          stopped_early = true;
          throw StopRequested{};
        }
      };

  kka::RunResult result;
  try {
    result = kka::run_kka(config, resume, hook);
  } catch (const StopRequested&) {
    std::cout << "stopped after iteration " << args.stop_after
              << " as requested; use --resume to continue\n";
    return kExitOk;
  }

  kka::World world = kka::generate_world(config.world);
  kka::save_world(out / "world", world);
  kka::save_report_csv(out / "report.csv", result.state.history);
  kka::save_timings_csv(out / "timings.csv", result.state.history);
  kka::save_curve_csv(out / "curves.csv", result.detector_curve);
  kka::save_detector(out / "detector", result.detector);

  const double final_auc =
      result.state.history.empty() ? 0.0 : result.state.history.back().auc;
  kka::save_summary_json(out / "summary.json", config, final_auc);

  std::cout << "run complete: " << result.state.history.size()
            << " report rows, final AUC "
            << (std::isnan(final_auc) ? std::string("n/a")
                                      : std::to_string(final_auc))
            << "\nreport: " << (out / "report.csv").string() << "\n";
  (void)stopped_early;
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;  // detector directory
  std::string world;
  std::string out;
};

int cmd_eval(const EvalArgs& args) {
  const kka::ConfusionEvaluator detector = kka::load_detector(args.checkpoint);
  const kka::WorldFiles world = kka::load_world(args.world);

  if (!world.test_normals.empty() &&
      world.test_normals.front().features.size() != detector.input_dim()) {
    throw std::invalid_argument(
        "detector expects dimension " + std::to_string(detector.input_dim()) +
        " but the test set has " +
        std::to_string(world.test_normals.front().features.size()));
  }

  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<double> near_scores, far_scores, normal_scores;
  for (const kka::Sample& s : world.test_normals) {
    normal_scores.push_back(kka::evaluator_distance(detector, s.features));
  }
  for (const kka::Sample& s : world.test_true_anomalies) {
    const double d = kka::evaluator_distance(detector, s.features);
    (s.hardness == kka::Hardness::hard ? near_scores : far_scores).push_back(d);
  }

  auto auc_of = [&](const std::vector<double>& anomaly) {
    std::vector<double> sc = normal_scores;
    std::vector<int> lb(normal_scores.size(), 0);
    sc.insert(sc.end(), anomaly.begin(), anomaly.end());
    lb.insert(lb.end(), anomaly.size(), 1);
    return kka::roc_auc(sc, lb);
  };

  std::vector<double> all = near_scores;
  all.insert(all.end(), far_scores.begin(), far_scores.end());

  char buf[64];
  std::string report;
  auto line = [&](const char* name, const std::vector<double>& anomaly) {
    if (anomaly.empty()) {
      report += std::string(name) + " n/a\n";
      return;
    }
    std::snprintf(buf, sizeof(buf), "%s %.6f\n", name, auc_of(anomaly));
    report += buf;
  };
  line("auc_near    ", near_scores);
  line("auc_far     ", far_scores);
  line("auc_combined", all);
  std::cout << report;
  if (!args.out.empty()) {
    std::ofstream outfile(args.out);
    outfile << report;
  }
  return kExitOk;
}

struct PlotArgs {
  std::string run;
  std::string checkpoint;  // defaults to the latest under run/checkpoints
  std::string world;       // defaults to run/world
  std::string out;
};

int cmd_plot(const PlotArgs& args) {
  const fs::path run(args.run);
  fs::path checkpoint(args.checkpoint);
  if (args.checkpoint.empty()) {
    const auto latest = latest_checkpoint(run / "checkpoints");
    if (!latest) {
      throw std::runtime_error("no checkpoint found under " +
                               (run / "checkpoints").string());
    }
    checkpoint = *latest;
  }
  const fs::path world_dir =
      args.world.empty() ? run / "world" : fs::path(args.world);

  const kka::Checkpoint cp = kka::load_checkpoint(checkpoint);
  const kka::WorldFiles world = kka::load_world(world_dir);

  const fs::path out(args.out);
  fs::create_directories(out);

  const std::vector<kka::PlotPoint> points = kka::project_groups(
      world.test_normals, cp.state.anomaly_set, world.test_true_anomalies);
  kka::save_plot_csv(out / "pca.csv", points);
  kka::save_scatter_svg(out / "pca.svg", points);

  // Convergence curves are copied from the run directory when present.
  if (fs::exists(run / "curves.csv")) {
    fs::copy_file(run / "curves.csv", out / "curves.csv",
                  fs::copy_options::overwrite_existing);
  }
  std::cout << "plot artifacts written to " << out.string() << " ("
            << points.size() << " points)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KKA curriculum engine: generated-anomaly hardness curricula "
               "for one-class detectors"};
  app.require_subcommand(1);

  GenWorldArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-world", "generate a synthetic world");
  gen->add_option("--out", gen_args.out, "output directory")->required();
  gen->add_option("--seed", gen_args.seed, "world seed");
  gen->add_option("--config", gen_args.config,
                  "run config supplying world parameters");
  gen->add_flag("--force", gen_args.force, "overwrite non-empty directory");

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "execute the curriculum");
  run->add_option("--config", run_args.config, "run config (JSON)")->required();
  run->add_option("--out", run_args.out, "output directory")->required();
  std::uint64_t seed_opt = 0;
  CLI::Option* seed_flag =
      run->add_option("--seed", seed_opt, "override the config seed");
  run->add_flag("--resume", run_args.resume, "continue from the latest checkpoint");
  run->add_flag("--force", run_args.force, "overwrite existing checkpoints");
  run->add_option("--stop-after", run_args.stop_after,
                  "stop after writing checkpoint N (for staged runs)");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "score a detector on a test set");
  eval->add_option("--checkpoint", eval_args.checkpoint, "detector directory")
      ->required();
  eval->add_option("--world", eval_args.world, "world directory")->required();
  eval->add_option("--out", eval_args.out, "also write metrics to this file");

  PlotArgs plot_args;
  CLI::App* plot = app.add_subcommand("plot", "emit PCA scatter and curves");
  plot->add_option("--run", plot_args.run, "run output directory")->required();
  plot->add_option("--checkpoint", plot_args.checkpoint,
                   "checkpoint directory (default: latest)");
  plot->add_option("--world", plot_args.world,
                   "world directory (default: <run>/world)");
  plot->add_option("--out", plot_args.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_world(gen_args);
    if (run->parsed()) {
      if (seed_flag->count() > 0) run_args.seed = seed_opt;
      return cmd_run(run_args);
    }
    if (eval->parsed()) return cmd_eval(eval_args);
    if (plot->parsed()) return cmd_plot(plot_args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
