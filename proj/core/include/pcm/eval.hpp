#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pcm/encoding.hpp"
#include "pcm/model.hpp"

namespace pcm {

// Exact ROC-AUC as a rank statistic with tie-aware average ranks; equal to
// the pairwise count (ties scored 0.5) over all positive-negative pairs.
// Throws MetricError when only one class is present.
double auc(std::span<const int> labels, std::span<const double> scores);

// mean absolute error, reported in days throughout
double mae(std::span<const double> targets, std::span<const double> predictions);

// MAE of the trivial predictor that always answers mean(targets)
double mae_baseline(std::span<const double> targets);

// deviant iff the raw regression output is strictly positive
int hybrid_decision(double raw_magnitude);

struct PredictionRow {
  std::string case_id;
  std::size_t prefix_len = 0;
  int label = 0;
  double target_days = 0.0;
  double score = 0.0;
  int decision = 0;
};

struct EvalReport {
  std::string approach;
  std::optional<double> auc;  // empty when undefined (single-class test set)
  double mae_days = 0.0;
  double mae_baseline_days = 0.0;
  std::size_t n_test_prefixes = 0;
  std::vector<PredictionRow> predictions;
  std::string score_note;
};

// Scores the test matrix with the model. Ranking scores: classification
// probability for baseline and multi-task, raw (pre-clamp) regression
// output for hybrid. Magnitude predictions are clamped at zero; the
// baseline approach has no magnitude output and reports the trivial
// predictor's error as its own.
EvalReport evaluate_run(const MtlModel& model, const FeatureMatrix& test);

// aligned comparison table, one row per approach
void write_report_table(const std::vector<EvalReport>& reports, std::ostream& out);

// machine-readable columnar form of the same table
void write_report_columns(const std::vector<EvalReport>& reports, std::ostream& out);

// per-prefix audit table
void write_predictions(const EvalReport& report, std::ostream& out);

}  // namespace pcm
