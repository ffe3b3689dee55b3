#include "clip/curriculum.hpp"

#include "bytes.hpp"
#include "clip/log.hpp"
#include "clip/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace clip {

namespace {

void validate_pacing(const PacingParams& pacing) {
  if (!(pacing.start_fraction > 0.0) || pacing.start_fraction > 1.0) {
    throw std::invalid_argument(
        "pacing start fraction must be in (0, 1], got " +
        std::to_string(pacing.start_fraction));
  }
  if (pacing.stages < 1) {
    throw std::invalid_argument("pacing needs at least one stage");
  }
  if (pacing.epochs_per_stage < 1) {
    throw std::invalid_argument("pacing needs at least one epoch per stage");
  }
}

double stage_epsilon(const ClipConfig& config, int stage) {
  if (config.epsilon_schedule.empty()) {
    return config.epsilon;
  }
  return config.epsilon_schedule[static_cast<std::size_t>(stage - 1)];
}

void validate_config(const ClipConfig& config, int stages) {
  const auto check = [](double eps) {
    if (eps < 0.0 || eps >= 1.0) {
      throw std::invalid_argument("epsilon must be in [0, 1), got " +
                                  std::to_string(eps));
    }
  };
  check(config.epsilon);
  if (!config.epsilon_schedule.empty()) {
    if (config.epsilon_schedule.size() != static_cast<std::size_t>(stages)) {
      throw ConfigError("epsilon schedule needs one entry per stage");
    }
    for (double eps : config.epsilon_schedule) {
      check(eps);
      if (eps != config.epsilon_schedule.front()) {
        throw ConfigError(
            "only constant epsilon schedules are supported for now");
      }
    }
  }
  if (config.batch_size < 1) {
    throw std::invalid_argument("batch size must be >= 1");
  }
}

// Shuffles the subset and chops it into batches of at most batch_size.
std::vector<std::vector<int>> partition_epoch(std::vector<int> subset,
                                              int batch_size, Rng& rng) {
  shuffle(subset, rng);
  std::vector<std::vector<int>> batches;
  batches.reserve((subset.size() + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < subset.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop =
        std::min(subset.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(subset.begin() + static_cast<std::ptrdiff_t>(start),
                         subset.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

std::vector<Sample> materialize_batch(const Dataset& train,
                                      const std::vector<int>& indices,
                                      const AugmentConfig& augment_config,
                                      Rng& augment_rng) {
  std::vector<Sample> batch;
  batch.reserve(indices.size());
  for (int idx : indices) {
    batch.push_back(
        augment(train.samples[static_cast<std::size_t>(idx)], augment_config,
                augment_rng));
  }
  return batch;
}

}  // namespace

ScoredDataset scored_from_values(const Dataset& dataset,
                                 std::vector<double> scores) {
  if (scores.size() != dataset.samples.size()) {
    throw std::invalid_argument("score count does not match the dataset");
  }
  ScoredDataset out;
  out.dataset = &dataset;
  out.scores = std::move(scores);
  out.order.resize(static_cast<int>(dataset.samples.size()));
  std::iota(out.order.begin(), out.order.end(), 0);
  std::sort(out.order.begin(), out.order.end(), [&](int a, int b) {
    const double sa = out.scores[static_cast<std::size_t>(a)];
    const double sb = out.scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa < sb;
    return dataset.samples[static_cast<std::size_t>(a)].id <
           dataset.samples[static_cast<std::size_t>(b)].id;
  });
  return out;
}

ScoredDataset score_samples(const Dataset& dataset,
                            const ModelParams& scoring_model) {
  if (dataset.samples.empty()) {
    throw std::invalid_argument("cannot score an empty dataset");
  }
  std::vector<double> scores;
  scores.reserve(dataset.samples.size());
  for (const Sample& s : dataset.samples) {
    if (!s.density.has_value()) {
      throw ValidationError("sample '" + s.id + "' has no cached density");
    }
    scores.push_back(loss(forward(scoring_model, s.image), *s.density));
  }
  return scored_from_values(dataset, std::move(scores));
}

ModelParams pretrain_scorer(const Dataset& dataset, int epochs,
                            std::uint64_t seed) {
  if (dataset.samples.empty()) {
    throw std::invalid_argument("cannot pretrain on an empty dataset");
  }
  if (epochs < 0) {
    throw std::invalid_argument("pretrain epochs must be >= 0");
  }
  ModelParams params = init_model(derive_seed(seed, streams::kScorerModel));
  if (epochs == 0) {
    return params;
  }
  OptimizerState optimizer;
  Rng shuffle_rng = seeded_rng(seed, streams::kScorerShuffle);
  const int n = static_cast<int>(dataset.samples.size());
  const int batch_size = std::min(8, n);
  std::vector<int> indices(static_cast<std::size_t>(n));
  std::iota(indices.begin(), indices.end(), 0);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (const auto& batch_indices :
         partition_epoch(indices, batch_size, shuffle_rng)) {
      std::vector<Sample> batch;
      batch.reserve(batch_indices.size());
      for (int idx : batch_indices) {
        batch.push_back(dataset.samples[static_cast<std::size_t>(idx)]);
      }
      train_batch(params, optimizer, batch);
    }
  }
  return params;
}

int pacing_size(const PacingParams& pacing, int stage, int dataset_size,
                int min_size) {
  validate_pacing(pacing);
  if (stage < 1 || stage > pacing.stages) {
    throw std::invalid_argument("stage " + std::to_string(stage) +
                                " outside 1.." +
                                std::to_string(pacing.stages));
  }
  if (dataset_size < 1) {
    throw std::invalid_argument("pacing needs a non-empty dataset");
  }
  const double t =
      static_cast<double>(stage) / static_cast<double>(pacing.stages);
  const double shape = pacing.kind == PacingKind::kLinear ? t : t * t;
  const double fraction = std::min(
      1.0, pacing.start_fraction + (1.0 - pacing.start_fraction) * shape);
  const int size =
      static_cast<int>(std::floor(fraction * static_cast<double>(dataset_size)));
  return std::clamp(size, std::min(min_size, dataset_size), dataset_size);
}

int prune_size(int size, double epsilon) {
  if (size < 0) {
    throw std::invalid_argument("prune size must be >= 0");
  }
  if (epsilon < 0.0 || epsilon >= 1.0) {
    throw std::invalid_argument("epsilon must be in [0, 1), got " +
                                std::to_string(epsilon));
  }
  const int removed = static_cast<int>(
      std::ceil(static_cast<double>(size) * epsilon));
  const int kept = size - removed;
  return size >= 1 ? std::max(kept, 1) : 0;
}

CurriculumPlan build_clip_schedule(const ScoredDataset& scored,
                                   const PacingParams& pacing,
                                   const ClipConfig& config) {
  if (scored.dataset == nullptr || scored.dataset->samples.empty()) {
    throw std::invalid_argument("cannot schedule an empty dataset");
  }
  if (scored.order.size() != scored.dataset->samples.size()) {
    throw std::invalid_argument("score order does not cover the dataset");
  }
  validate_pacing(pacing);
  validate_config(config, pacing.stages);

  const int n = static_cast<int>(scored.dataset->samples.size());
  Rng shuffle_rng = seeded_rng(config.seed, streams::kPlanShuffle);
  CurriculumPlan plan;
  plan.stages.reserve(static_cast<std::size_t>(pacing.stages));

  // Under kPruneEasiest, the easiest `retired` samples of the score order
  // are gone for good; the live pool is the remainder.
  int retired = 0;

  for (int stage = 1; stage <= pacing.stages; ++stage) {
    const int raw = pacing_size(pacing, stage, n,
                                std::min(config.batch_size, n));
    const double epsilon = stage_epsilon(config, stage);
    const int effective = prune_size(raw, epsilon);

    StagePlan sp;
    sp.stage_index = stage;
    sp.pacing_size = raw;
    if (config.prune_policy == PrunePolicy::kPrefixTruncate) {
      sp.subset_indices.assign(scored.order.begin(),
                               scored.order.begin() + effective);
    } else {
      int to_retire = raw - effective;
      const int pool = n - retired;
      to_retire = std::min(to_retire,
                           std::max(0, pool - config.batch_size));
      retired += to_retire;
      const int take = std::min(effective, n - retired);
      sp.subset_indices.assign(
          scored.order.begin() + retired,
          scored.order.begin() + retired + take);
    }
    sp.subset_size = static_cast<int>(sp.subset_indices.size());
    if (sp.subset_size < config.batch_size) {
      throw ConfigError("stage " + std::to_string(stage) + " subset (" +
                        std::to_string(sp.subset_size) +
                        " samples) is smaller than one batch of " +
                        std::to_string(config.batch_size));
    }
    sp.epoch_batches.reserve(
        static_cast<std::size_t>(pacing.epochs_per_stage));
    for (int epoch = 0; epoch < pacing.epochs_per_stage; ++epoch) {
      sp.epoch_batches.push_back(
          partition_epoch(sp.subset_indices, config.batch_size, shuffle_rng));
      plan.total_samples_consumed += sp.subset_size;
    }
    plan.stages.push_back(std::move(sp));
  }
  return plan;
}

CurriculumPlan build_standard_schedule(const Dataset& dataset,
                                       int total_epochs, int batch_size,
                                       std::uint64_t seed) {
  if (dataset.samples.empty()) {
    throw std::invalid_argument("cannot schedule an empty dataset");
  }
  if (total_epochs < 1) {
    throw std::invalid_argument("need at least one epoch");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("batch size must be >= 1");
  }
  const int n = static_cast<int>(dataset.samples.size());
  if (batch_size > n) {
    throw ConfigError("batch of " + std::to_string(batch_size) +
                      " exceeds the dataset of " + std::to_string(n));
  }
  Rng shuffle_rng = seeded_rng(seed, streams::kPlanShuffle);
  StagePlan sp;
  sp.stage_index = 1;
  sp.pacing_size = n;
  sp.subset_size = n;
  sp.subset_indices.resize(static_cast<std::size_t>(n));
  std::iota(sp.subset_indices.begin(), sp.subset_indices.end(), 0);
  CurriculumPlan plan;
  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    sp.epoch_batches.push_back(
        partition_epoch(sp.subset_indices, batch_size, shuffle_rng));
    plan.total_samples_consumed += n;
  }
  plan.stages.push_back(std::move(sp));
  return plan;
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& dataset) {
  std::vector<int> by_id(static_cast<int>(dataset.samples.size()));
  std::iota(by_id.begin(), by_id.end(), 0);
  std::sort(by_id.begin(), by_id.end(), [&](int a, int b) {
    return dataset.samples[static_cast<std::size_t>(a)].id <
           dataset.samples[static_cast<std::size_t>(b)].id;
  });
  const std::size_t n = by_id.size();
  const std::size_t n_val = n / 5;
  Dataset train;
  Dataset val;
  train.sigma = dataset.sigma;
  val.sigma = dataset.sigma;
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = dataset.samples[static_cast<std::size_t>(by_id[i])];
    (i < n - n_val ? train : val).samples.push_back(s);
  }
  return {std::move(train), std::move(val)};
}

RunResult run_plan(const CurriculumPlan& plan, const Dataset& train,
                   const Dataset& val, const RunOptions& options) {
  if (plan.stages.empty()) {
    throw std::invalid_argument("empty plan");
  }
  if (val.samples.empty()) {
    throw std::invalid_argument("run_plan needs a non-empty validation set");
  }
  const int n = static_cast<int>(train.samples.size());
  for (const StagePlan& sp : plan.stages) {
    for (int idx : sp.subset_indices) {
      if (idx < 0 || idx >= n) {
        throw std::invalid_argument(
            "plan refers to sample " + std::to_string(idx) +
            " outside the training set of " + std::to_string(n));
      }
    }
  }

  RunResult result;
  result.model = init_model(options.model_seed);
  OptimizerState optimizer;
  optimizer.learning_rate = options.learning_rate;
  Rng augment_rng = seeded_rng(options.augment_seed, streams::kAugment);

  long long consumed = 0;
  int epoch_number = 0;
  for (const StagePlan& sp : plan.stages) {
    for (const auto& batches : sp.epoch_batches) {
      ++epoch_number;
      double loss_weighted = 0.0;
      long long epoch_samples = 0;
      for (const auto& batch_indices : batches) {
        const std::vector<Sample> batch = materialize_batch(
            train, batch_indices, options.augment, augment_rng);
        const double batch_value = train_batch(result.model, optimizer, batch);
        loss_weighted += batch_value * static_cast<double>(batch.size());
        epoch_samples += static_cast<long long>(batch.size());
      }
      consumed += epoch_samples;
      const double train_loss =
          loss_weighted / static_cast<double>(epoch_samples);
      if (!std::isfinite(train_loss)) {
        throw ValidationError("training diverged at stage " +
                              std::to_string(sp.stage_index) + " epoch " +
                              std::to_string(epoch_number));
      }

      std::vector<DensityGrid> predictions;
      predictions.reserve(val.samples.size());
      for (const Sample& s : val.samples) {
        predictions.push_back(forward(result.model, s.image));
      }
      const MetricsRecord m = evaluate(predictions, val, options.game_level);

      RunLogRow row;
      row.stage = sp.stage_index;
      row.epoch = epoch_number;
      row.samples_cum = consumed;
      row.train_loss = train_loss;
      row.val_mae = m.mae;
      row.val_game = m.game;
      row.val_ssim = m.ssim;
      row.val_psnr = m.psnr;
      result.log.rows.push_back(row);
      log_debug("stage " + std::to_string(sp.stage_index) + " epoch " +
                std::to_string(epoch_number) + " loss " +
                std::to_string(train_loss) + " val_mae " +
                std::to_string(m.mae));
    }
  }
  return result;
}

void write_score_file(const ScoredDataset& scored,
                      const std::filesystem::path& path) {
  if (scored.dataset == nullptr) {
    throw std::invalid_argument("unscored dataset");
  }
  std::string bytes;
  for (int idx : scored.order) {
    bytes += scored.dataset->samples[static_cast<std::size_t>(idx)].id;
    bytes += ' ';
    bytes += detail::format_double(scored.scores[static_cast<std::size_t>(idx)]);
    bytes += '\n';
  }
  detail::write_file(path, bytes);
}

std::vector<std::pair<std::string, double>> read_score_file(
    const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  std::vector<std::pair<std::string, double>> entries;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < bytes.size()) {
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) end = bytes.size();
    std::string line = bytes.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::size_t sep = line.rfind(' ');
    if (sep == std::string::npos || sep == 0) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'sample_id score'");
    }
    double score = 0.0;
    const char* begin = line.data() + sep + 1;
    const char* stop = line.data() + line.size();
    const auto res = std::from_chars(begin, stop, score);
    if (res.ec != std::errc() || res.ptr != stop) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": bad score value");
    }
    entries.emplace_back(line.substr(0, sep), score);
  }
  return entries;
}

void write_plan_json(const CurriculumPlan& plan, const Dataset& dataset,
                     const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["total_samples_consumed"] = plan.total_samples_consumed;
  doc["stages"] = nlohmann::json::array();
  for (const StagePlan& sp : plan.stages) {
    nlohmann::json stage;
    stage["stage"] = sp.stage_index;
    stage["pacing_size"] = sp.pacing_size;
    stage["subset_size"] = sp.subset_size;
    stage["epochs"] = sp.epoch_batches.size();
    auto ids = nlohmann::json::array();
    for (int idx : sp.subset_indices) {
      ids.push_back(dataset.samples[static_cast<std::size_t>(idx)].id);
    }
    stage["subset_ids"] = std::move(ids);
    doc["stages"].push_back(std::move(stage));
  }
  detail::write_file(path, doc.dump(2) + "\n");
}

}  // namespace clip
