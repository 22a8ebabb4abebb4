// pcm: generate / label / encode / train / evaluate / predict / gradcheck
//
// Exit codes: 0 success, 1 user or configuration error, 2 internal error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "pcm/constraint.hpp"
#include "pcm/encoding.hpp"
#include "pcm/errors.hpp"
#include "pcm/eval.hpp"
#include "pcm/event_log.hpp"
#include "pcm/harness.hpp"
#include "pcm/kv.hpp"
#include "pcm/labeling.hpp"
#include "pcm/model.hpp"
#include "pcm/rng.hpp"
#include "pcm/synthgen.hpp"

namespace fs = std::filesystem;

namespace {

struct GenerateOpts {
  std::string out;
  std::string preset = "table1-o2c";
  std::uint64_t seed = 7;
  std::size_t traces = 0;
  double positive_ratio = -1.0;
  std::string bound;
  double signal = -1.0;
  double cancel_prob = -1.0;
  double late_cancel_prob = -1.0;
};

int cmd_generate(const GenerateOpts& opt) {
  if (opt.preset != "table1-o2c") {
    throw pcm::ConfigError("unknown preset '" + opt.preset + "' (available: table1-o2c)");
  }
  pcm::GenSpec spec = pcm::table1_o2c_preset();
  spec.seed = opt.seed;
  if (opt.traces > 0) spec.n_traces = opt.traces;
  if (opt.positive_ratio >= 0.0) spec.positive_ratio = opt.positive_ratio;
  if (!opt.bound.empty()) spec.bound_seconds = pcm::parse_duration_seconds(opt.bound);
  if (opt.signal >= 0.0) spec.signal_strength = opt.signal;
  if (opt.cancel_prob >= 0.0) spec.cancel_probability = opt.cancel_prob;
  if (opt.late_cancel_prob >= 0.0) spec.late_cancel_probability = opt.late_cancel_prob;

  const pcm::GeneratedLog gen = pcm::generate(spec);
  fs::create_directories(opt.out);
  pcm::save_log(gen.log, gen.schema, fs::path(opt.out) / "log.csv");
  pcm::save_log_schema(gen.schema, fs::path(opt.out) / "log.schema");
  pcm::save_constraint(gen.constraint, fs::path(opt.out) / "constraint.cfg");
  {
    std::ofstream truth(fs::path(opt.out) / "ground_truth.cols");
    if (!truth) throw pcm::ConfigError("cannot write ground_truth.cols");
    pcm::write_ground_truth(gen.truth, truth);
  }

  std::size_t positives = 0;
  for (const auto& t : gen.truth) positives += t.label;
  std::printf("wrote %zu traces to %s (deviant fraction %.3f)\n", gen.log.traces.size(),
              (fs::path(opt.out) / "log.csv").c_str(),
              static_cast<double>(positives) / static_cast<double>(gen.truth.size()));
  return 0;
}

struct PipelineOpts {
  std::string log, schema, constraint;
  std::string end_activities;
  std::size_t max_prefix_len = 0;
  double percentile = 0.90;
  std::size_t min_prefix_len = 1;
};

// shared front half: parse + filter + label + cut + prefixes
std::tuple<pcm::LogSchema, std::vector<pcm::LabeledPrefix>, std::size_t> labeled_prefixes(
    const PipelineOpts& opt) {
  const pcm::LogSchema schema = pcm::load_log_schema(opt.schema);
  const pcm::TemporalConstraint constraint = pcm::load_constraint(opt.constraint);
  pcm::EventLog log = pcm::load_log(opt.log, schema);
  const auto ends = pcm::split_list(opt.end_activities);
  log = pcm::remove_incomplete_cases(log, {ends.begin(), ends.end()});
  const auto cases = pcm::label_log(log, constraint);
  const std::size_t cap =
      opt.max_prefix_len > 0 ? opt.max_prefix_len : pcm::max_prefix_length(cases, opt.percentile);
  return {schema, pcm::generate_prefixes(cases, cap, opt.min_prefix_len), cap};
}

int cmd_label(const PipelineOpts& opt, const std::string& out) {
  const auto [schema, prefixes, cap] = labeled_prefixes(opt);
  std::ofstream file(out);
  if (!file) throw pcm::ConfigError("cannot write " + out);
  pcm::write_prefix_dump(prefixes, schema, file);
  std::printf("wrote %zu prefixes (max length %zu) to %s\n", prefixes.size(), cap, out.c_str());
  return 0;
}

int cmd_encode(const PipelineOpts& opt, const std::string& out) {
  const auto [schema, prefixes, cap] = labeled_prefixes(opt);
  const pcm::EncoderSpec spec = pcm::fit_encoder(prefixes, schema.attribute_map());
  const pcm::FeatureMatrix matrix = pcm::encode(prefixes, spec);
  fs::create_directories(out);
  pcm::save_encoder(spec, fs::path(out) / "encoder.json");
  {
    std::ofstream features(fs::path(out) / "features.cols");
    if (!features) throw pcm::ConfigError("cannot write features.cols");
    pcm::write_feature_matrix(matrix, features);
  }
  std::printf("encoded %zu prefixes into %zu features (max length %zu); digest %s\n", matrix.rows,
              matrix.cols, cap, pcm::encoder_digest(spec).c_str());
  return 0;
}

struct TrainOpts {
  std::string manifest;
  std::string log, schema, constraint, out;
  std::string approaches;
  std::string split;
  double split_fraction = -1.0;
  std::int64_t folds = -1;
  std::int64_t trials = -1;
  std::int64_t seed = -1;
  double percentile = -1.0;
  std::int64_t min_prefix_len = -1;
  std::int64_t max_prefix_len = -1;
  std::string end_activities = "\x01";  // sentinel: not passed
  std::string hidden;
  double learning_rate = -1.0;
  std::int64_t batch_size = -1;
  std::int64_t epochs = -1;
  double dropout = -1.0;
  std::int64_t patience = -1;
  std::size_t jobs = 1;
};

pcm::ExperimentConfig resolve_train_config(const TrainOpts& opt) {
  pcm::ExperimentConfig config;
  if (!opt.manifest.empty()) {
    config = pcm::config_from_manifest(pcm::KvFile::load(opt.manifest));
  }
  if (!opt.log.empty()) config.log_path = opt.log;
  if (!opt.schema.empty()) config.schema_path = opt.schema;
  if (!opt.constraint.empty()) config.constraint_path = opt.constraint;
  if (!opt.approaches.empty()) {
    config.approaches.clear();
    if (opt.approaches == "all") {
      config.approaches = {pcm::Mode::Baseline, pcm::Mode::Hybrid, pcm::Mode::Mtl};
    } else {
      for (const auto& name : pcm::split_list(opt.approaches)) {
        config.approaches.push_back(pcm::mode_from_name(name));
      }
    }
  }
  if (!opt.split.empty()) {
    if (opt.split == "temporal") config.split_mode = pcm::SplitMode::Temporal;
    else if (opt.split == "random") config.split_mode = pcm::SplitMode::Random;
    else throw pcm::ConfigError("--split must be temporal or random");
  }
  if (opt.split_fraction >= 0.0) config.split_fraction = opt.split_fraction;
  if (opt.folds >= 0) config.folds = static_cast<std::size_t>(opt.folds);
  if (opt.trials >= 0) config.trials = static_cast<std::size_t>(opt.trials);
  if (opt.seed >= 0) config.seed = static_cast<std::uint64_t>(opt.seed);
  if (opt.percentile >= 0.0) config.percentile = opt.percentile;
  if (opt.min_prefix_len >= 0) config.min_prefix_len = static_cast<std::size_t>(opt.min_prefix_len);
  if (opt.max_prefix_len >= 0) config.max_prefix_len = static_cast<std::size_t>(opt.max_prefix_len);
  if (opt.end_activities != "\x01") config.end_activities = pcm::split_list(opt.end_activities);
  if (!opt.hidden.empty()) {
    config.base_train.hidden_sizes.clear();
    for (const auto& part : pcm::split_list(opt.hidden)) {
      const long v = std::strtol(part.c_str(), nullptr, 10);
      if (v <= 0) throw pcm::ConfigError("--hidden sizes must be positive integers");
      config.base_train.hidden_sizes.push_back(static_cast<std::size_t>(v));
    }
  }
  if (opt.learning_rate >= 0.0) config.base_train.learning_rate = opt.learning_rate;
  if (opt.batch_size >= 0) config.base_train.batch_size = static_cast<std::size_t>(opt.batch_size);
  if (opt.epochs >= 0) config.base_train.epochs = static_cast<std::size_t>(opt.epochs);
  if (opt.dropout >= 0.0) config.base_train.dropout = opt.dropout;
  if (opt.patience >= 0) config.base_train.patience = static_cast<std::size_t>(opt.patience);
  config.jobs = opt.jobs;
  config.out_dir = opt.out;
  if (config.out_dir.empty()) throw pcm::ConfigError("--out is required");
  return config;
}

int cmd_train(const TrainOpts& opt) {
  const pcm::ExperimentConfig config = resolve_train_config(opt);
  const pcm::ExperimentResult result = pcm::run_experiment(config);
  std::vector<pcm::EvalReport> reports;
  for (const auto& a : result.artifacts) reports.push_back(a.report);
  std::ostringstream table;
  pcm::write_report_table(reports, table);
  std::fputs(table.str().c_str(), stdout);
  std::printf("artifacts written to %s\n", config.out_dir.c_str());
  return 0;
}

int cmd_evaluate(const std::string& run_dir) {
  const fs::path dir(run_dir);
  if (!fs::exists(dir / "manifest")) {
    throw pcm::ConfigError("no manifest found in " + run_dir);
  }
  pcm::ExperimentConfig config = pcm::config_from_manifest(pcm::KvFile::load(dir / "manifest"));
  config.out_dir = dir;

  // replay the deterministic data pipeline, then score the saved models
  const pcm::LogSchema schema = pcm::load_log_schema(config.schema_path);
  const pcm::TemporalConstraint constraint = pcm::load_constraint(config.constraint_path);
  pcm::EventLog log = pcm::load_log(config.log_path, schema);
  log = pcm::remove_incomplete_cases(
      log, {config.end_activities.begin(), config.end_activities.end()});
  const auto cases = pcm::label_log(log, constraint);
  auto [train_cases, test_cases] =
      pcm::split_log(cases, config.split_fraction, config.split_mode, config.seed);
  const std::size_t cap = config.max_prefix_len > 0
                              ? config.max_prefix_len
                              : pcm::max_prefix_length(train_cases, config.percentile);
  const auto test_prefixes = pcm::generate_prefixes(test_cases, cap, config.min_prefix_len);

  std::vector<pcm::EvalReport> reports;
  for (const pcm::Mode approach : config.approaches) {
    const std::string name = pcm::mode_name(approach);
    const pcm::LoadedModel loaded = pcm::load_model(dir / ("model." + name));
    const pcm::FeatureMatrix test_matrix = pcm::encode(test_prefixes, loaded.encoder);
    pcm::EvalReport report = pcm::evaluate_run(loaded.model, test_matrix);
    std::ofstream predictions(dir / ("predictions." + name + ".cols"));
    if (!predictions) throw pcm::ConfigError("cannot write predictions file");
    pcm::write_predictions(report, predictions);
    reports.push_back(std::move(report));
  }

  {
    std::ofstream table(dir / "report.txt");
    if (!table) throw pcm::ConfigError("cannot write report.txt");
    table << "constraint: " << constraint.id << "  cases: " << cases.size()
          << "  train: " << train_cases.size() << "  test: " << test_cases.size()
          << "  prefix cap: " << cap << "\n";
    pcm::write_report_table(reports, table);
    std::ofstream cols(dir / "report.cols");
    if (!cols) throw pcm::ConfigError("cannot write report.cols");
    pcm::write_report_columns(reports, cols);
  }
  std::ostringstream table;
  pcm::write_report_table(reports, table);
  std::fputs(table.str().c_str(), stdout);
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& input,
                const std::string& out_path) {
  const pcm::LoadedModel loaded = pcm::load_model(model_path);
  const pcm::EventLog log = pcm::load_log(input, loaded.log_schema);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw pcm::ConfigError("cannot write " + out_path);
    out = &file;
  }

  *out << "case_id,probability,magnitude_days,decision\n";
  char buf[64];
  for (const auto& trace : log.traces) {
    pcm::LabeledPrefix prefix;
    prefix.case_id = trace.case_id;
    prefix.prefix.case_id = trace.case_id;
    const std::size_t keep = std::min(trace.events.size(), loaded.prefix_cap);
    prefix.prefix.events.assign(trace.events.begin(),
                                trace.events.begin() + static_cast<long>(keep));
    prefix.prefix_len = keep;

    const pcm::FeatureMatrix m = pcm::encode({prefix}, loaded.encoder);
    const pcm::Prediction p = pcm::forward(loaded.model, m.row(0));
    const int decision = loaded.model.mode == pcm::Mode::Hybrid
                             ? pcm::hybrid_decision(p.raw_magnitude)
                             : (p.prob > 0.5 ? 1 : 0);
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%d", p.prob, p.magnitude_days(), decision);
    *out << trace.case_id << "," << buf << "\n";
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t rows, std::size_t features, double tolerance) {
  bool all_passed = true;
  for (const pcm::Mode mode : {pcm::Mode::Baseline, pcm::Mode::Hybrid, pcm::Mode::Mtl}) {
    pcm::Rng rng(pcm::mix_seed(seed, static_cast<std::uint64_t>(mode)));
    pcm::FeatureMatrix m;
    m.rows = rows;
    m.cols = features;
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < features; ++j) m.values.push_back(rng.normal());
      m.labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
      m.magnitudes_days.push_back(m.labels.back() ? std::abs(rng.normal(1.0, 0.5)) : 0.0);
      m.case_ids.push_back("r" + std::to_string(i));
      m.prefix_lens.push_back(1);
    }
    pcm::TrainConfig cfg;
    cfg.hidden_sizes = {8, 8, 8};
    cfg.seed = rng.next_u64();
    const pcm::MtlModel model = pcm::make_model(mode, features, cfg);

    std::vector<std::size_t> all(rows);
    std::iota(all.begin(), all.end(), 0);
    const pcm::GradCheckReport report =
        pcm::gradient_check(model, m, all, 1e-5, tolerance);
    all_passed &= report.passed;

    std::printf("%-10s max relative error %.3e (tolerance %.0e) %s\n",
                pcm::mode_name(mode).c_str(), report.max_rel_error, tolerance,
                report.passed ? "PASS" : "FAIL");
    for (const auto& layer : report.layers) {
      std::printf("  %-8s %.3e\n", layer.name.c_str(), layer.max_rel_error);
    }
  }
  return all_passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"predictive compliance monitoring: violation and magnitude prediction on event logs"};
  app.require_subcommand(1);

  GenerateOpts gen;
  auto* generate = app.add_subcommand("generate", "generate a synthetic order-to-cash event log");
  generate->add_option("--out", gen.out, "output directory")->required();
  generate->add_option("--preset", gen.preset, "generator preset (table1-o2c)");
  generate->add_option("--seed", gen.seed, "generator seed");
  generate->add_option("--traces", gen.traces, "number of traces");
  generate->add_option("--positive-ratio", gen.positive_ratio, "target deviant fraction");
  generate->add_option("--bound", gen.bound, "ship deadline, e.g. 24h");
  generate->add_option("--signal", gen.signal, "predictive signal strength in [0,1]");
  generate->add_option("--cancel-prob", gen.cancel_prob, "pre-confirmation cancel probability");
  generate->add_option("--late-cancel-prob", gen.late_cancel_prob,
                       "post-confirmation cancel probability");

  PipelineOpts pipeline;
  std::string label_out;
  auto add_pipeline_flags = [&pipeline](CLI::App* cmd) {
    cmd->add_option("--log", pipeline.log, "event log file")->required();
    cmd->add_option("--schema", pipeline.schema, "log schema file")->required();
    cmd->add_option("--constraint", pipeline.constraint, "constraint file")->required();
    cmd->add_option("--end-activities", pipeline.end_activities,
                    "comma list; keep only cases ending in one of these");
    cmd->add_option("--max-prefix-len", pipeline.max_prefix_len,
                    "prefix cap (0 = percentile of positive case lengths)");
    cmd->add_option("--percentile", pipeline.percentile, "percentile for the prefix cap");
    cmd->add_option("--min-prefix-len", pipeline.min_prefix_len, "shortest prefix to emit");
  };
  auto* label = app.add_subcommand("label", "label cases, cut traces and dump prefixes");
  add_pipeline_flags(label);
  label->add_option("--out", label_out, "output file")->required();

  std::string encode_out;
  auto* encode = app.add_subcommand("encode", "fit an encoder and export the feature matrix");
  add_pipeline_flags(encode);
  encode->add_option("--out", encode_out, "output directory")->required();

  TrainOpts train;
  auto* train_cmd = app.add_subcommand("train", "train and evaluate the selected approaches");
  train_cmd->add_option("--manifest", train.manifest, "experiment manifest to start from");
  train_cmd->add_option("--log", train.log, "event log file");
  train_cmd->add_option("--schema", train.schema, "log schema file");
  train_cmd->add_option("--constraint", train.constraint, "constraint file");
  train_cmd->add_option("--out", train.out, "run directory")->required();
  train_cmd->add_option("--approach", train.approaches,
                        "all | comma list of baseline,hybrid,multi-task");
  train_cmd->add_option("--split", train.split, "temporal | random");
  train_cmd->add_option("--split-fraction", train.split_fraction, "training share, default 0.8");
  train_cmd->add_option("--folds", train.folds, "cross-validation folds");
  train_cmd->add_option("--trials", train.trials, "random-search budget (0 = no search)");
  train_cmd->add_option("--seed", train.seed, "experiment seed");
  train_cmd->add_option("--percentile", train.percentile, "prefix cap percentile");
  train_cmd->add_option("--min-prefix-len", train.min_prefix_len, "shortest prefix");
  train_cmd->add_option("--max-prefix-len", train.max_prefix_len, "prefix cap override");
  train_cmd->add_option("--end-activities", train.end_activities, "completed-case filter");
  train_cmd->add_option("--hidden", train.hidden, "hidden layer sizes, e.g. 32,32");
  train_cmd->add_option("--learning-rate", train.learning_rate, "optimizer learning rate");
  train_cmd->add_option("--batch-size", train.batch_size, "mini-batch size");
  train_cmd->add_option("--epochs", train.epochs, "training epochs");
  train_cmd->add_option("--dropout", train.dropout, "dropout rate (0 disables)");
  train_cmd->add_option("--patience", train.patience, "early-stop patience (0 disables)");
  train_cmd->add_option("--jobs", train.jobs, "parallel search trials");

  std::string eval_run;
  auto* evaluate = app.add_subcommand("evaluate", "re-score the saved models of a run directory");
  evaluate->add_option("--run", eval_run, "run directory written by train")->required();

  std::string predict_model, predict_input, predict_out;
  auto* predict = app.add_subcommand("predict", "score running cases with a saved model");
  predict->add_option("--model", predict_model, "model file")->required();
  predict->add_option("--input", predict_input, "partial-trace log file")->required();
  predict->add_option("--out", predict_out, "output file (default: stdout)");

  std::uint64_t gc_seed = 1;
  std::size_t gc_rows = 32, gc_features = 8;
  double gc_tol = 1e-5;
  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and numeric gradients");
  gradcheck->add_option("--seed", gc_seed, "seed");
  gradcheck->add_option("--rows", gc_rows, "batch rows");
  gradcheck->add_option("--features", gc_features, "feature width");
  gradcheck->add_option("--tolerance", gc_tol, "max relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen);
    if (label->parsed()) return cmd_label(pipeline, label_out);
    if (encode->parsed()) return cmd_encode(pipeline, encode_out);
    if (train_cmd->parsed()) return cmd_train(train);
    if (evaluate->parsed()) return cmd_evaluate(eval_run);
    if (predict->parsed()) return cmd_predict(predict_model, predict_input, predict_out);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_rows, gc_features, gc_tol);
  } catch (const pcm::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const pcm::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const pcm::SearchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const pcm::GenerationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
