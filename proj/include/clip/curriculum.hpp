#pragma once

#include "clip/model.hpp"
#include "clip/runlog.hpp"
#include "clip/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace clip {

// Difficulty scores for one dataset, plus the sample order they induce.
struct ScoredDataset {
  const Dataset* dataset{nullptr};
  std::vector<double> scores;  // scores[i] belongs to dataset->samples[i]
  std::vector<int> order;      // sample indices, easiest first
};

enum class PacingKind { kLinear, kQuadratic };

struct PacingParams {
  PacingKind kind{PacingKind::kQuadratic};
  double start_fraction{0.2};  // subset fraction at the first stage
  int stages{10};
  int epochs_per_stage{2};
};

enum class PrunePolicy {
  // Shrink each stage's easiest-first prefix; nothing is removed for good.
  kPrefixTruncate,
  // Permanently drop the easiest samples, never leaving fewer survivors
  // than one batch.
  kPruneEasiest,
};

struct ClipConfig {
  double epsilon{0.05};
  // Optional per-stage epsilon sequence. Only constant sequences are
  // accepted for now; when set it must have one entry per stage.
  std::vector<double> epsilon_schedule;
  PrunePolicy prune_policy{PrunePolicy::kPrefixTruncate};
  int batch_size{8};
  std::uint64_t seed{0};
};

struct StagePlan {
  int stage_index{0};  // 1-based
  int pacing_size{0};  // subset size before pruning
  int subset_size{0};  // after pruning, == subset_indices.size()
  std::vector<int> subset_indices;  // dataset sample indices, easiest first
  // epoch_batches[e][b] lists the dataset sample indices of batch b in
  // epoch e of this stage.
  std::vector<std::vector<std::vector<int>>> epoch_batches;
};

struct CurriculumPlan {
  std::vector<StagePlan> stages;
  long long total_samples_consumed{0};
};

// Per-sample prediction loss under a fixed scoring model; lower means
// easier. Ties in the induced order break by ascending id.
ScoredDataset score_samples(const Dataset& dataset,
                            const ModelParams& scoring_model);

// Builds a ScoredDataset from externally supplied scores (one per sample).
ScoredDataset scored_from_values(const Dataset& dataset,
                                 std::vector<double> scores);

// Trains a fresh model on the dataset for the given number of epochs
// (batch size 8, no augmentation) and returns it for use as the scoring
// model. epochs == 0 returns the freshly initialized model.
ModelParams pretrain_scorer(const Dataset& dataset, int epochs,
                            std::uint64_t seed);

// Subset size at stage (1-based): floor(n * min(1, b0 + (1 - b0) * t)) with
// t = stage/stages for linear pacing and t^2 for quadratic, clamped to at
// least min(min_size, n). The last stage always covers the whole dataset.
int pacing_size(const PacingParams& pacing, int stage, int dataset_size,
                int min_size = 1);

// floor(size * (1 - epsilon)), at least 1 when size >= 1. Evaluated as
// size - ceil(size * epsilon) so decimal epsilons floor exactly.
int prune_size(int size, double epsilon);

// Stage subsets are easiest-first prefixes of the score order, shrunk by
// epsilon each stage per the prune policy, then shuffled into batches per
// epoch. Throws ConfigError naming the stage if a subset ends up smaller
// than one batch.
CurriculumPlan build_clip_schedule(const ScoredDataset& scored,
                                   const PacingParams& pacing,
                                   const ClipConfig& config);

// One stage covering the whole dataset in its natural order for
// total_epochs epochs. The per-epoch shuffling matches the curriculum
// builder's, so the two are comparable seed for seed.
CurriculumPlan build_standard_schedule(const Dataset& dataset,
                                       int total_epochs, int batch_size,
                                       std::uint64_t seed);

// The last fifth of the samples in ascending id order; the rest train.
// Frozen before any scoring so the held-out set is never scored against,
// trained on, or pruned.
std::pair<Dataset, Dataset> split_train_val(const Dataset& dataset);

struct RunOptions {
  std::uint64_t model_seed{0};
  std::uint64_t augment_seed{0};
  AugmentConfig augment;
  double learning_rate{1e-4};
  int game_level{2};
};

struct RunResult {
  ModelParams model;
  RunLog log;
};

// Executes a plan against the training set, validating after every epoch.
// Plan indices refer to `train`; every train sample needs a cached density
// and `val` must be non-empty.
RunResult run_plan(const CurriculumPlan& plan, const Dataset& train,
                   const Dataset& val, const RunOptions& options);

// Score files pair one "sample_id score" line per sample.
void write_score_file(const ScoredDataset& scored,
                      const std::filesystem::path& path);
std::vector<std::pair<std::string, double>> read_score_file(
    const std::filesystem::path& path);

// Debugging dump: stages with sizes and subset ids as JSON.
void write_plan_json(const CurriculumPlan& plan, const Dataset& dataset,
                     const std::filesystem::path& path);

}  // namespace clip
