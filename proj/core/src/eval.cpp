#include "pcm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "pcm/errors.hpp"

namespace pcm {

double auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw ContractViolation("auc: label/score length mismatch");
  }
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += (y == 1);
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw MetricError("auc: undefined for single-class labels");
  }

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // average ranks over tie groups, then the Mann-Whitney identity
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double mae(std::span<const double> targets, std::span<const double> predictions) {
  if (targets.size() != predictions.size()) {
    throw ContractViolation("mae: target/prediction length mismatch");
  }
  if (targets.empty()) throw ContractViolation("mae: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    sum += std::abs(targets[i] - predictions[i]);
  }
  return sum / static_cast<double>(targets.size());
}

double mae_baseline(std::span<const double> targets) {
  if (targets.empty()) throw ContractViolation("mae_baseline: empty input");
  double mean = 0.0;
  for (double y : targets) mean += y;
  mean /= static_cast<double>(targets.size());
  double sum = 0.0;
  for (double y : targets) sum += std::abs(y - mean);
  return sum / static_cast<double>(targets.size());
}

int hybrid_decision(double raw_magnitude) { return raw_magnitude > 0.0 ? 1 : 0; }

EvalReport evaluate_run(const MtlModel& model, const FeatureMatrix& test) {
  if (test.rows == 0) throw ContractViolation("evaluate_run: empty test matrix");

  EvalReport report;
  report.approach = mode_name(model.mode);
  report.n_test_prefixes = test.rows;

  std::vector<double> scores(test.rows);
  std::vector<double> magnitude_preds(test.rows);
  report.predictions.resize(test.rows);

  for (std::size_t i = 0; i < test.rows; ++i) {
    const Prediction p = forward(model, test.row(i));
    double score = 0.0;
    int decision = 0;
    switch (model.mode) {
      case Mode::Baseline:
      case Mode::Mtl:
        score = p.prob;
        decision = p.prob > 0.5 ? 1 : 0;
        break;
      case Mode::Hybrid:
        score = p.raw_magnitude;  // pre-clamp output keeps the ranking informative
        decision = hybrid_decision(p.raw_magnitude);
        break;
    }
    scores[i] = score;
    magnitude_preds[i] = p.magnitude_days();

    PredictionRow& row = report.predictions[i];
    row.case_id = test.case_ids[i];
    row.prefix_len = test.prefix_lens[i];
    row.label = test.labels[i];
    row.target_days = test.magnitudes_days[i];
    row.score = score;
    row.decision = decision;
  }

  try {
    report.auc = auc(test.labels, scores);
  } catch (const MetricError&) {
    report.auc = std::nullopt;
  }

  report.mae_baseline_days = mae_baseline(test.magnitudes_days);
  if (model.mode == Mode::Baseline) {
    // no magnitude output; the trivial mean predictor stands in
    report.mae_days = report.mae_baseline_days;
  } else {
    report.mae_days = mae(test.magnitudes_days, magnitude_preds);
  }

  if (model.mode == Mode::Hybrid) {
    report.score_note = "hybrid AUC ranks by the raw (pre-clamp) regression output";
  }
  return report;
}

namespace {

std::string fmt_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string fmt_auc(const std::optional<double>& v) {
  return v ? fmt_metric(*v) : std::string("n/a");
}

}  // namespace

void write_report_table(const std::vector<EvalReport>& reports, std::ostream& out) {
  out << "approach      AUC      MAE[d]   base-MAE[d]  prefixes\n";
  char line[128];
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%-12s  %-7s  %-7s  %-11s  %zu\n", r.approach.c_str(),
                  fmt_auc(r.auc).c_str(), fmt_metric(r.mae_days).c_str(),
                  fmt_metric(r.mae_baseline_days).c_str(), r.n_test_prefixes);
    out << line;
  }
  for (const auto& r : reports) {
    if (!r.score_note.empty()) out << "note: " << r.score_note << "\n";
  }
}

void write_report_columns(const std::vector<EvalReport>& reports, std::ostream& out) {
  out << "approach,auc,mae_days,mae_baseline_days,n_test_prefixes\n";
  for (const auto& r : reports) {
    out << r.approach << "," << fmt_auc(r.auc) << "," << fmt_metric(r.mae_days) << ","
        << fmt_metric(r.mae_baseline_days) << "," << r.n_test_prefixes << "\n";
  }
}

void write_predictions(const EvalReport& report, std::ostream& out) {
  out << "case_id,prefix_len,label,target_days,score,decision\n";
  char buf[64];
  for (const auto& row : report.predictions) {
    out << row.case_id << "," << row.prefix_len << "," << row.label << ",";
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g", row.target_days, row.score);
    out << buf << "," << row.decision << "\n";
  }
}

}  // namespace pcm
