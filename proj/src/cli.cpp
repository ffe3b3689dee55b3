#include "clip/cli.hpp"

#include "bytes.hpp"
#include "clip/curriculum.hpp"
#include "clip/dataio.hpp"
#include "clip/density.hpp"
#include "clip/log.hpp"
#include "clip/metrics.hpp"
#include "clip/model.hpp"
#include "clip/report.hpp"
#include "clip/synthdata.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <limits>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace clip::cli {

namespace {

namespace fs = std::filesystem;

// Fills in ground-truth densities for samples that were stored without one.
void ensure_densities(Dataset& dataset) {
  const KernelSpec spec(dataset.sigma);
  for (Sample& s : dataset.samples) {
    if (!s.density.has_value()) {
      s.density =
          render_density(s.dots, s.image.rows(), s.image.cols(), spec);
    }
  }
}

struct GenArgs {
  int n = 0;
  std::string out;
  SceneConfig scene;
  std::uint64_t seed = 0;
};

int cmd_gen(const GenArgs& args) {
  if (args.n < 1) {
    throw std::invalid_argument("--n must be >= 1");
  }
  validate(args.scene);
  log_info("generating " + std::to_string(args.n) + " scenes into " +
           args.out);
  const Dataset ds = generate_dataset(args.n, args.scene, args.seed);
  const fs::path manifest = save_dataset(ds, args.out);
  std::cout << manifest.string() << "\n";
  return 0;
}

struct ScoreArgs {
  std::string data;
  std::string out;
  int epochs = 5;
  std::uint64_t seed = 0;
};

int cmd_score(const ScoreArgs& args) {
  if (args.epochs < 0) {
    throw std::invalid_argument("--epochs must be >= 0");
  }
  Dataset ds = load_dataset(args.data);
  if (ds.samples.empty()) {
    throw ValidationError("dataset " + args.data + " is empty");
  }
  ensure_densities(ds);
  const auto [train, val] = split_train_val(ds);
  // The scorer never sees the held-out fifth; the score file still covers
  // every sample so diagnostics and later tooling can see the full picture.
  const Dataset& basis = train.samples.empty() ? ds : train;
  log_info("pretraining scorer for " + std::to_string(args.epochs) +
           " epochs on " + std::to_string(basis.samples.size()) + " samples");
  const ModelParams scorer = pretrain_scorer(basis, args.epochs, args.seed);
  const ScoredDataset scored = score_samples(ds, scorer);
  write_score_file(scored, args.out);

  std::vector<double> sorted = scored.scores;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::cout << args.out << "\n";
  std::cout << "samples: " << n << "\n";
  std::cout << "min: " << detail::format_double(sorted.front()) << "\n";
  std::cout << "median: " << detail::format_double(sorted[n / 2]) << "\n";
  std::cout << "max: " << detail::format_double(sorted.back()) << "\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string scores;
  std::string strategy = "standard";
  std::string pacing = "quadratic";
  double b0 = 0.2;
  int stages = 10;
  int epochs_per_stage = 2;
  int epochs = 20;
  double epsilon = 0.05;
  std::string prune_policy = "prefix_truncate";
  int batch_size = 8;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::string out = ".";
  std::string dump_plan;
};

struct TrainOutcome {
  fs::path log_path;
  fs::path checkpoint_path;
};

TrainOutcome train_one_seed(const TrainArgs& args, const Dataset& train,
                            const Dataset& val,
                            const std::vector<double>* train_scores,
                            std::uint64_t seed) {
  CurriculumPlan plan;
  RunLogMeta meta;
  meta.strategy = args.strategy;
  meta.seed = seed;
  meta.dataset_path = args.data;
  if (args.strategy == "clip") {
    PacingParams pacing;
    pacing.kind = args.pacing == "linear" ? PacingKind::kLinear
                                          : PacingKind::kQuadratic;
    pacing.start_fraction = args.b0;
    pacing.stages = args.stages;
    pacing.epochs_per_stage = args.epochs_per_stage;
    ClipConfig config;
    config.epsilon = args.epsilon;
    config.prune_policy = args.prune_policy == "prune_easiest"
                              ? PrunePolicy::kPruneEasiest
                              : PrunePolicy::kPrefixTruncate;
    config.batch_size = args.batch_size;
    config.seed = seed;
    const ScoredDataset scored = scored_from_values(train, *train_scores);
    plan = build_clip_schedule(scored, pacing, config);
    meta.pacing = args.pacing;
    meta.epsilon = args.epsilon;
  } else {
    plan = build_standard_schedule(train, args.epochs, args.batch_size, seed);
    meta.pacing = "-";
    meta.epsilon = 0.0;
  }
  if (!args.dump_plan.empty()) {
    write_plan_json(plan, train,
                    args.dump_plan + (args.seeds.size() > 1
                                          ? "." + std::to_string(seed)
                                          : ""));
  }

  RunOptions options;
  options.model_seed = seed;
  options.augment_seed = seed;
  RunResult result = run_plan(plan, train, val, options);
  result.log.meta = meta;

  TrainOutcome outcome;
  const std::string tag = args.strategy + "_seed" + std::to_string(seed);
  outcome.log_path = fs::path(args.out) / ("runlog_" + tag + ".csv");
  outcome.checkpoint_path = fs::path(args.out) / ("model_" + tag + ".clpm");
  write_runlog_csv(result.log, outcome.log_path);
  save_checkpoint(result.model, outcome.checkpoint_path);
  return outcome;
}

int cmd_train(const TrainArgs& args) {
  if (args.strategy != "standard" && args.strategy != "clip") {
    throw std::invalid_argument("--strategy must be standard or clip");
  }
  if (args.pacing != "linear" && args.pacing != "quadratic") {
    throw std::invalid_argument("--pacing must be linear or quadratic");
  }
  if (args.prune_policy != "prefix_truncate" &&
      args.prune_policy != "prune_easiest") {
    throw std::invalid_argument(
        "--prune-policy must be prefix_truncate or prune_easiest");
  }
  if (args.epsilon < 0.0 || args.epsilon >= 1.0) {
    throw std::invalid_argument("--epsilon must be in [0, 1)");
  }
  if (!(args.b0 > 0.0) || args.b0 > 1.0) {
    throw std::invalid_argument("--b0 must be in (0, 1]");
  }
  if (args.stages < 1 || args.epochs_per_stage < 1 || args.epochs < 1 ||
      args.batch_size < 1) {
    throw std::invalid_argument(
        "--stages, --epochs-per-stage, --epochs and --batch-size must be "
        ">= 1");
  }
  if (args.strategy == "clip" && args.scores.empty()) {
    throw std::invalid_argument("--strategy clip requires --scores");
  }

  Dataset ds = load_dataset(args.data);
  if (ds.samples.empty()) {
    throw ValidationError("dataset " + args.data + " is empty");
  }
  ensure_densities(ds);
  const auto [train, val] = split_train_val(ds);
  if (train.samples.empty() || val.samples.empty()) {
    throw ValidationError(
        "dataset too small to hold out a validation fifth (" +
        std::to_string(ds.samples.size()) + " samples)");
  }

  std::vector<double> train_scores;
  if (args.strategy == "clip") {
    std::unordered_map<std::string, double> by_id;
    for (auto& [id, score] : read_score_file(args.scores)) {
      by_id[id] = score;
    }
    train_scores.reserve(train.samples.size());
    for (const Sample& s : train.samples) {
      const auto it = by_id.find(s.id);
      if (it == by_id.end()) {
        throw ValidationError("score file " + args.scores +
                              " has no entry for sample '" + s.id + "'");
      }
      train_scores.push_back(it->second);
    }
  }

  std::error_code ec;
  fs::create_directories(args.out, ec);
  if (ec) {
    throw IoError("cannot create directory " + args.out + ": " +
                  ec.message());
  }

  std::vector<std::uint64_t> seeds = args.seeds;
  if (seeds.empty()) {
    seeds.push_back(args.seed);
  }
  log_info("training strategy=" + args.strategy + " on " +
           std::to_string(train.samples.size()) + " train / " +
           std::to_string(val.samples.size()) + " val samples, " +
           std::to_string(seeds.size()) + " seed(s)");

  std::vector<TrainOutcome> outcomes(seeds.size());
  std::vector<std::exception_ptr> failures(seeds.size());
  if (seeds.size() == 1) {
    outcomes[0] = train_one_seed(args, train, val,
                                 args.strategy == "clip" ? &train_scores
                                                         : nullptr,
                                 seeds[0]);
  } else {
    std::vector<std::thread> workers;
    workers.reserve(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      workers.emplace_back([&, i] {
        try {
          outcomes[i] = train_one_seed(args, train, val,
                                       args.strategy == "clip" ? &train_scores
                                                               : nullptr,
                                       seeds[i]);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      });
    }
    for (std::thread& w : workers) {
      w.join();
    }
    for (const std::exception_ptr& failure : failures) {
      if (failure) {
        std::rethrow_exception(failure);
      }
    }
  }
  for (const TrainOutcome& outcome : outcomes) {
    std::cout << "log: " << outcome.log_path.string() << "\n";
    std::cout << "checkpoint: " << outcome.checkpoint_path.string() << "\n";
  }
  return 0;
}

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string split = "val";
  int game_level = 2;
};

int cmd_eval(const EvalArgs& args) {
  if (args.split != "train" && args.split != "val" && args.split != "all") {
    throw std::invalid_argument("--split must be train, val or all");
  }
  if (args.game_level < 0) {
    throw std::invalid_argument("--game-level must be >= 0");
  }
  Dataset ds = load_dataset(args.data);
  if (ds.samples.empty()) {
    throw ValidationError("dataset " + args.data + " is empty");
  }
  ensure_densities(ds);
  Dataset subset;
  if (args.split == "all") {
    subset = std::move(ds);
  } else {
    auto [train, val] = split_train_val(ds);
    subset = args.split == "train" ? std::move(train) : std::move(val);
  }
  if (subset.samples.empty()) {
    throw ValidationError("split '" + args.split + "' is empty");
  }
  for (const Sample& s : subset.samples) {
    const Eigen::Index side = std::min(s.image.rows(), s.image.cols());
    if ((Eigen::Index(1) << args.game_level) > side) {
      throw std::invalid_argument(
          "--game-level " + std::to_string(args.game_level) +
          " needs 2^level <= " + std::to_string(side) + " (sample '" +
          s.id + "')");
    }
  }

  const ModelParams model = load_checkpoint(args.checkpoint);
  std::vector<DensityGrid> predictions;
  predictions.reserve(subset.samples.size());
  for (const Sample& s : subset.samples) {
    predictions.push_back(forward(model, s.image));
  }
  const MetricsRecord m = evaluate(predictions, subset, args.game_level);

  const double psnr_out = std::isinf(m.psnr) ? 100.0 : m.psnr;
  std::cout << "samples: " << subset.samples.size() << "\n";
  std::cout << "mae: " << detail::format_double(m.mae) << "\n";
  std::cout << "game: " << detail::format_double(m.game) << "\n";
  std::cout << "ssim: " << detail::format_double(m.ssim) << "\n";
  std::cout << "psnr: " << detail::format_double(psnr_out) << "\n";

  nlohmann::json doc;
  doc["split"] = args.split;
  doc["game_level"] = args.game_level;
  doc["samples"] = subset.samples.size();
  doc["mae"] = m.mae;
  doc["game"] = m.game;
  doc["ssim"] = m.ssim;
  doc["psnr"] = psnr_out;
  detail::write_file(args.checkpoint + ".metrics.json", doc.dump(2) + "\n");
  return 0;
}

struct ReportArgs {
  std::vector<std::string> logs;
  double loss_threshold = std::numeric_limits<double>::quiet_NaN();
  std::string out = ".";
};

int cmd_report(const ReportArgs& args) {
  if (args.logs.size() < 2) {
    throw std::invalid_argument("--logs needs at least two run logs");
  }
  std::vector<RunLog> runs;
  std::vector<std::string> labels;
  std::set<std::string> used;
  runs.reserve(args.logs.size());
  for (const std::string& path : args.logs) {
    runs.push_back(read_runlog_csv(path));
    std::string label = fs::path(path).stem().string();
    std::string candidate = label;
    int suffix = 2;
    while (!used.insert(candidate).second) {
      candidate = label + "#" + std::to_string(suffix++);
    }
    labels.push_back(candidate);
  }
  const ReportPaths paths = write_report(runs, labels, args.out);
  std::cout << paths.merged_csv.string() << "\n";
  std::cout << paths.chart_svg.string() << "\n";
  if (!std::isnan(args.loss_threshold)) {
    for (const ThresholdEntry& entry :
         samples_to_threshold(runs, labels, args.loss_threshold)) {
      if (entry.reached) {
        std::cout << entry.label << ": reached at " << entry.samples
                  << " samples (final loss "
                  << detail::format_double(entry.final_loss) << ")\n";
      } else {
        std::cout << entry.label << ": not reached (final loss "
                  << detail::format_double(entry.final_loss) << ")\n";
      }
    }
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"curriculum training toolkit for crowd-density regression"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd =
      app.add_subcommand("gen", "generate a synthetic crowd dataset");
  gen_cmd->add_option("--n", gen.n, "number of scenes")->required();
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--height", gen.scene.height, "scene height (px)");
  gen_cmd->add_option("--width", gen.scene.width, "scene width (px)");
  gen_cmd->add_option("--count-min", gen.scene.count_min,
                      "minimum heads per scene");
  gen_cmd->add_option("--count-max", gen.scene.count_max,
                      "maximum heads per scene");
  gen_cmd->add_option("--sigma", gen.scene.sigma_gt,
                      "ground-truth density bandwidth");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");

  ScoreArgs score;
  CLI::App* score_cmd = app.add_subcommand(
      "score", "pretrain a scorer and write per-sample difficulty scores");
  score_cmd->add_option("--data", score.data, "dataset manifest")->required();
  score_cmd->add_option("--out", score.out, "score file path")->required();
  score_cmd->add_option("--epochs", score.epochs, "scorer pretrain epochs");
  score_cmd->add_option("--seed", score.seed, "scorer seed");

  TrainArgs train;
  CLI::App* train_cmd =
      app.add_subcommand("train", "train a density regressor");
  train_cmd->add_option("--data", train.data, "dataset manifest")->required();
  train_cmd->add_option("--strategy", train.strategy,
                        "standard or clip")
      ->required();
  train_cmd->add_option("--scores", train.scores,
                        "score file (required for clip)");
  train_cmd->add_option("--pacing", train.pacing, "linear or quadratic");
  train_cmd->add_option("--b0", train.b0, "starting subset fraction");
  train_cmd->add_option("--stages", train.stages, "curriculum stages");
  train_cmd->add_option("--epochs-per-stage", train.epochs_per_stage,
                        "epochs per curriculum stage");
  train_cmd->add_option("--epochs", train.epochs,
                        "total epochs (standard strategy)");
  train_cmd->add_option("--epsilon", train.epsilon, "per-stage prune rate");
  train_cmd->add_option("--prune-policy", train.prune_policy,
                        "prefix_truncate or prune_easiest");
  train_cmd->add_option("--batch-size", train.batch_size, "batch size");
  auto* seed_opt = train_cmd->add_option("--seed", train.seed, "run seed");
  train_cmd
      ->add_option("--seeds", train.seeds,
                   "comma-separated seeds, one concurrent run each")
      ->delimiter(',')
      ->excludes(seed_opt);
  train_cmd->add_option("--out", train.out, "output directory");
  train_cmd->add_option("--dump-plan", train.dump_plan,
                        "write the schedule as JSON to this path");

  EvalArgs eval;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  eval_cmd->add_option("--data", eval.data, "dataset manifest")->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "model checkpoint")
      ->required();
  eval_cmd->add_option("--split", eval.split, "train, val or all");
  eval_cmd->add_option("--game-level", eval.game_level,
                       "GAME partition level");

  ReportArgs report;
  CLI::App* report_cmd = app.add_subcommand(
      "report", "merge run logs into a comparison table and chart");
  report_cmd->add_option("--logs", report.logs, "run log CSV paths")
      ->required()
      ->expected(-1);
  report_cmd->add_option("--loss-threshold", report.loss_threshold,
                         "report samples needed to reach this loss");
  report_cmd->add_option("--out", report.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen);
    if (score_cmd->parsed()) return cmd_score(score);
    if (train_cmd->parsed()) return cmd_train(train);
    if (eval_cmd->parsed()) return cmd_eval(eval);
    if (report_cmd->parsed()) return cmd_report(report);
    throw std::invalid_argument("no subcommand given");
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace clip::cli
