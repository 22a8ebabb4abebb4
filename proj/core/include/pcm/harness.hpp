#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pcm/constraint.hpp"
#include "pcm/encoding.hpp"
#include "pcm/eval.hpp"
#include "pcm/event_log.hpp"
#include "pcm/kv.hpp"
#include "pcm/labeling.hpp"
#include "pcm/model.hpp"

namespace pcm {

enum class SplitMode { Temporal, Random };

struct ExperimentConfig {
  std::filesystem::path log_path;
  std::filesystem::path schema_path;
  std::filesystem::path constraint_path;
  std::vector<Mode> approaches{Mode::Baseline, Mode::Hybrid, Mode::Mtl};
  double split_fraction = 0.8;
  SplitMode split_mode = SplitMode::Temporal;
  std::size_t folds = 3;
  std::size_t trials = 0;  // 0 skips hyperparameter search
  std::uint64_t seed = 1;
  double percentile = 0.90;
  std::size_t min_prefix_len = 1;
  std::size_t max_prefix_len = 0;  // 0 derives the cap from training positives
  std::vector<std::string> end_activities;
  TrainConfig base_train;

  // not part of the manifest: where to write and how many worker threads
  std::filesystem::path out_dir;
  std::size_t jobs = 1;
};

// manifest <-> config; the manifest carries everything that affects outputs
ExperimentConfig config_from_manifest(const KvFile& manifest);
KvFile manifest_from_config(const ExperimentConfig& config);

// Case-granularity split. Temporal: order by first-event timestamp (ties by
// case id), earliest floor(fraction*n) cases train. Random: seeded shuffle,
// same sizes. Throws ConfigError when either side would be empty.
std::pair<std::vector<LabeledCase>, std::vector<LabeledCase>> split_log(
    const std::vector<LabeledCase>& cases, double fraction, SplitMode mode, std::uint64_t seed);

// [begin, end) index ranges of k contiguous folds over n items; sizes differ
// by at most one, larger folds first
std::vector<std::pair<std::size_t, std::size_t>> fold_ranges(std::size_t n, std::size_t folds);

// Contiguous temporal folds over the training cases. Per fold: prefix cap
// and encoder fitted on the fold-train side only, model trained, fold
// validation scored (AUC for baseline/multi-task, MAE for hybrid). Folds
// whose metric is undefined are dropped; throws SearchError when every fold
// is dropped.
double cross_validate(const std::vector<LabeledCase>& train_cases, const ExperimentConfig& config,
                      const std::map<std::string, AttrType>& attribute_schema, Mode approach,
                      const TrainConfig& trial);

struct TrialResult {
  std::size_t index = 0;
  TrainConfig config;
  std::optional<double> metric;  // empty when the trial could not be scored
};

struct SearchResult {
  TrainConfig best;
  std::size_t best_index = 0;
  std::vector<TrialResult> trials;
};

// Seeded random search over layer sizes, learning rate (log-uniform),
// dropout and batch size. Trial t depends only on (seed, approach, t), so
// a larger budget extends the same trial stream.
SearchResult random_search(const std::vector<LabeledCase>& train_cases,
                           const ExperimentConfig& config,
                           const std::map<std::string, AttrType>& attribute_schema, Mode approach);

struct ApproachArtifacts {
  Mode approach;
  TrainConfig final_config;
  std::string encoder_digest;
  EvalReport report;
};

struct ExperimentResult {
  std::vector<ApproachArtifacts> artifacts;
  std::size_t prefix_cap = 0;
  std::size_t n_train_cases = 0;
  std::size_t n_test_cases = 0;
};

// Full pipeline: parse -> filter -> label -> split -> cap -> prefixes ->
// encode -> (search) -> train -> evaluate. Writes manifest, report.txt,
// report.cols, trials.log and per-approach model.<a> / encoder.<a> /
// predictions.<a>.cols under config.out_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace pcm
