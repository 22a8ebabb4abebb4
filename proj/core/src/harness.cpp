#include "pcm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "pcm/errors.hpp"
#include "pcm/rng.hpp"
#include "serial_util.hpp"

namespace pcm {

namespace {

std::string approaches_to_string(const std::vector<Mode>& approaches) {
  std::string out;
  for (std::size_t i = 0; i < approaches.size(); ++i) {
    if (i) out += ", ";
    out += mode_name(approaches[i]);
  }
  return out;
}

std::string hidden_to_string(const std::vector<std::size_t>& sizes, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(sizes[i]);
  }
  return out;
}

std::vector<std::size_t> hidden_from_string(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& part : split_list(text)) {
    std::size_t value = 0;
    try {
      value = static_cast<std::size_t>(std::stoull(part));
    } catch (...) {
      throw ConfigError("bad hidden layer size '" + part + "'");
    }
    if (value == 0) throw ConfigError("hidden layer sizes must be positive");
    out.push_back(value);
  }
  if (out.empty()) throw ConfigError("hidden layer list is empty");
  return out;
}

std::vector<LabeledCase> order_temporal(std::vector<LabeledCase> cases) {
  std::sort(cases.begin(), cases.end(), [](const LabeledCase& a, const LabeledCase& b) {
    const std::int64_t ta = a.cut_trace.events.front().timestamp;
    const std::int64_t tb = b.cut_trace.events.front().timestamp;
    if (ta != tb) return ta < tb;
    return a.case_id < b.case_id;
  });
  return cases;
}

std::size_t prefix_cap_for(const std::vector<LabeledCase>& train_cases,
                           const ExperimentConfig& config) {
  if (config.max_prefix_len > 0) return config.max_prefix_len;
  return max_prefix_length(train_cases, config.percentile);
}

// fold validation metric; empty when undefined on this fold
std::optional<double> score_fold(const std::vector<LabeledCase>& fold_train,
                                 const std::vector<LabeledCase>& fold_val,
                                 const ExperimentConfig& config,
                                 const std::map<std::string, AttrType>& attribute_schema,
                                 Mode approach, const TrainConfig& trial, std::size_t fold_index) {
  std::size_t cap = 0;
  try {
    cap = prefix_cap_for(fold_train, config);
  } catch (const ConfigError&) {
    return std::nullopt;  // no positives in this fold's training side
  }
  const auto train_prefixes = generate_prefixes(fold_train, cap, config.min_prefix_len);
  const auto val_prefixes = generate_prefixes(fold_val, cap, config.min_prefix_len);
  if (train_prefixes.empty() || val_prefixes.empty()) return std::nullopt;

  const EncoderSpec encoder = fit_encoder(train_prefixes, attribute_schema);
  const FeatureMatrix train_matrix = encode(train_prefixes, encoder);
  const FeatureMatrix val_matrix = encode(val_prefixes, encoder);

  TrainConfig fold_config = trial;
  fold_config.seed = mix_seed(trial.seed, fold_index);
  Trainer trainer(make_model(approach, encoder.feature_count(), fold_config), fold_config);
  trainer.fit(train_matrix);

  if (approach == Mode::Hybrid) {
    std::vector<double> preds(val_matrix.rows);
    for (std::size_t i = 0; i < val_matrix.rows; ++i) {
      preds[i] = forward(trainer.model(), val_matrix.row(i)).magnitude_days();
    }
    return mae(val_matrix.magnitudes_days, preds);
  }
  std::vector<double> probs(val_matrix.rows);
  for (std::size_t i = 0; i < val_matrix.rows; ++i) {
    probs[i] = forward(trainer.model(), val_matrix.row(i)).prob;
  }
  try {
    return auc(val_matrix.labels, probs);
  } catch (const MetricError&) {
    return std::nullopt;
  }
}

constexpr std::uint64_t kApproachStream[] = {0x6261u, 0x6879u, 0x6d74u};  // per-mode streams

std::uint64_t approach_stream_seed(std::uint64_t seed, Mode approach) {
  return mix_seed(seed, kApproachStream[static_cast<int>(approach)]);
}

TrainConfig sample_trial(const ExperimentConfig& config, Mode approach, std::size_t index) {
  static const std::vector<std::size_t> depths = {1, 2};
  static const std::vector<std::size_t> widths = {8, 16, 32, 64};
  static const std::vector<double> dropouts = {0.0, 0.1, 0.2};
  static const std::vector<std::size_t> batches = {16, 32, 64};

  Rng rng(mix_seed(approach_stream_seed(config.seed, approach), index));
  TrainConfig trial = config.base_train;
  const std::size_t depth = rng.pick(depths);
  const std::size_t width = rng.pick(widths);
  trial.hidden_sizes.assign(depth, width);
  trial.learning_rate = std::exp(rng.uniform(std::log(1e-4), std::log(1e-2)));
  trial.dropout = rng.pick(dropouts);
  trial.batch_size = rng.pick(batches);
  trial.seed = rng.next_u64();
  return trial;
}

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::pair<std::vector<LabeledCase>, std::vector<LabeledCase>> split_log(
    const std::vector<LabeledCase>& cases, double fraction, SplitMode mode, std::uint64_t seed) {
  if (cases.size() < 2) {
    throw ConfigError("split_log: need at least 2 cases, got " + std::to_string(cases.size()));
  }
  if (fraction <= 0.0 || fraction >= 1.0) {
    throw ConfigError("split_log: fraction must be in (0, 1)");
  }
  std::vector<LabeledCase> ordered;
  if (mode == SplitMode::Temporal) {
    ordered = order_temporal(cases);
  } else {
    ordered = cases;
    std::vector<std::size_t> idx(cases.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(mix_seed(seed, 0x5e17));
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) ordered[i] = cases[idx[i]];
  }

  const auto n_train = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(cases.size()) + 1e-9));
  if (n_train == 0 || n_train >= cases.size()) {
    throw ConfigError("split_log: split fraction leaves one side empty");
  }
  std::vector<LabeledCase> train(ordered.begin(), ordered.begin() + n_train);
  std::vector<LabeledCase> test(ordered.begin() + n_train, ordered.end());
  return {std::move(train), std::move(test)};
}

std::vector<std::pair<std::size_t, std::size_t>> fold_ranges(std::size_t n, std::size_t folds) {
  const std::size_t base = n / folds;
  const std::size_t extra = n % folds;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  ranges.reserve(folds);
  std::size_t begin = 0;
  for (std::size_t fold = 0; fold < folds; ++fold) {
    const std::size_t end = begin + base + (fold < extra ? 1 : 0);
    ranges.emplace_back(begin, end);
    begin = end;
  }
  return ranges;
}

double cross_validate(const std::vector<LabeledCase>& train_cases, const ExperimentConfig& config,
                      const std::map<std::string, AttrType>& attribute_schema, Mode approach,
                      const TrainConfig& trial) {
  if (config.folds < 2) throw ConfigError("cross_validate: folds must be >= 2");
  if (train_cases.size() < config.folds) {
    throw ConfigError("cross_validate: fewer cases than folds");
  }
  const std::vector<LabeledCase> ordered = order_temporal(train_cases);

  double sum = 0.0;
  std::size_t used = 0;
  std::size_t fold = 0;
  for (const auto& [begin, end] : fold_ranges(ordered.size(), config.folds)) {
    std::vector<LabeledCase> fold_val(ordered.begin() + begin, ordered.begin() + end);
    std::vector<LabeledCase> fold_train;
    fold_train.reserve(ordered.size() - (end - begin));
    fold_train.insert(fold_train.end(), ordered.begin(), ordered.begin() + begin);
    fold_train.insert(fold_train.end(), ordered.begin() + end, ordered.end());

    const auto metric =
        score_fold(fold_train, fold_val, config, attribute_schema, approach, trial, fold++);
    if (metric) {
      sum += *metric;
      ++used;
    }
  }
  if (used == 0) {
    throw SearchError("cross_validate: metric undefined on every fold");
  }
  return sum / static_cast<double>(used);
}

SearchResult random_search(const std::vector<LabeledCase>& train_cases,
                           const ExperimentConfig& config,
                           const std::map<std::string, AttrType>& attribute_schema, Mode approach) {
  if (config.trials < 1) throw ConfigError("random_search: search budget must be >= 1");

  std::vector<TrialResult> results(config.trials);
  auto evaluate_trial = [&](std::size_t t) {
    TrialResult r;
    r.index = t;
    r.config = sample_trial(config, approach, t);
    try {
      r.metric = cross_validate(train_cases, config, attribute_schema, approach, r.config);
    } catch (const SearchError&) {
      r.metric = std::nullopt;
    }
    results[t] = std::move(r);
  };

  if (config.jobs <= 1) {
    for (std::size_t t = 0; t < config.trials; ++t) evaluate_trial(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const std::size_t n_workers = std::min(config.jobs, config.trials);
    workers.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
      workers.emplace_back([&]() {
        for (std::size_t t = next.fetch_add(1); t < config.trials; t = next.fetch_add(1)) {
          evaluate_trial(t);
        }
      });
    }
    for (auto& worker : workers) worker.join();
  }

  const bool maximize = approach != Mode::Hybrid;  // AUC up, MAE down
  std::optional<std::size_t> best;
  for (std::size_t t = 0; t < results.size(); ++t) {
    if (!results[t].metric) continue;
    if (!best) {
      best = t;
      continue;
    }
    const double current = *results[t].metric;
    const double incumbent = *results[*best].metric;
    if (maximize ? current > incumbent : current < incumbent) best = t;
  }
  if (!best) {
    throw SearchError("random_search: no trial produced a defined metric");
  }

  SearchResult out;
  out.best = results[*best].config;
  out.best_index = *best;
  out.trials = std::move(results);
  return out;
}

ExperimentConfig config_from_manifest(const KvFile& manifest) {
  ExperimentConfig config;
  config.log_path = manifest.get("log");
  config.schema_path = manifest.get("schema");
  config.constraint_path = manifest.get("constraint");
  if (manifest.has("approaches")) {
    config.approaches.clear();
    for (const auto& name : split_list(manifest.get("approaches"))) {
      config.approaches.push_back(mode_from_name(name));
    }
    if (config.approaches.empty()) throw ConfigError("manifest: empty approaches list");
  }
  if (manifest.has("split")) {
    const std::string& mode = manifest.get("split");
    if (mode == "temporal") config.split_mode = SplitMode::Temporal;
    else if (mode == "random") config.split_mode = SplitMode::Random;
    else throw ConfigError("manifest: split must be temporal or random");
  }
  if (manifest.has("split_fraction")) config.split_fraction = manifest.get_double("split_fraction");
  if (manifest.has("folds")) config.folds = static_cast<std::size_t>(manifest.get_int("folds"));
  if (manifest.has("trials")) config.trials = static_cast<std::size_t>(manifest.get_int("trials"));
  if (manifest.has("seed")) config.seed = static_cast<std::uint64_t>(manifest.get_int("seed"));
  if (manifest.has("percentile")) config.percentile = manifest.get_double("percentile");
  if (manifest.has("min_prefix_len")) {
    config.min_prefix_len = static_cast<std::size_t>(manifest.get_int("min_prefix_len"));
  }
  if (manifest.has("max_prefix_len")) {
    config.max_prefix_len = static_cast<std::size_t>(manifest.get_int("max_prefix_len"));
  }
  if (manifest.has("end_activities")) {
    config.end_activities = split_list(manifest.get("end_activities"));
  }
  if (manifest.has("hidden")) config.base_train.hidden_sizes = hidden_from_string(manifest.get("hidden"));
  if (manifest.has("learning_rate")) config.base_train.learning_rate = manifest.get_double("learning_rate");
  if (manifest.has("batch_size")) {
    config.base_train.batch_size = static_cast<std::size_t>(manifest.get_int("batch_size"));
  }
  if (manifest.has("epochs")) config.base_train.epochs = static_cast<std::size_t>(manifest.get_int("epochs"));
  if (manifest.has("dropout")) config.base_train.dropout = manifest.get_double("dropout");
  if (manifest.has("patience")) {
    config.base_train.patience = static_cast<std::size_t>(manifest.get_int("patience"));
  }

  if (config.split_fraction <= 0.0 || config.split_fraction >= 1.0) {
    throw ConfigError("manifest: split_fraction must be in (0, 1)");
  }
  if (config.percentile <= 0.0 || config.percentile > 1.0) {
    throw ConfigError("manifest: percentile must be in (0, 1]");
  }
  if (config.min_prefix_len < 1) throw ConfigError("manifest: min_prefix_len must be >= 1");
  if (config.trials > 0 && config.folds < 2) {
    throw ConfigError("manifest: folds must be >= 2 when search is enabled");
  }
  return config;
}

KvFile manifest_from_config(const ExperimentConfig& config) {
  KvFile kv;
  kv.set("log", config.log_path.string());
  kv.set("schema", config.schema_path.string());
  kv.set("constraint", config.constraint_path.string());
  kv.set("approaches", approaches_to_string(config.approaches));
  kv.set("split", config.split_mode == SplitMode::Temporal ? "temporal" : "random");
  kv.set_double("split_fraction", config.split_fraction);
  kv.set_int("folds", static_cast<std::int64_t>(config.folds));
  kv.set_int("trials", static_cast<std::int64_t>(config.trials));
  kv.set_int("seed", static_cast<std::int64_t>(config.seed));
  kv.set_double("percentile", config.percentile);
  kv.set_int("min_prefix_len", static_cast<std::int64_t>(config.min_prefix_len));
  kv.set_int("max_prefix_len", static_cast<std::int64_t>(config.max_prefix_len));
  std::string ends;
  for (std::size_t i = 0; i < config.end_activities.size(); ++i) {
    if (i) ends += ", ";
    ends += config.end_activities[i];
  }
  kv.set("end_activities", ends);
  kv.set("hidden", hidden_to_string(config.base_train.hidden_sizes));
  kv.set_double("learning_rate", config.base_train.learning_rate);
  kv.set_int("batch_size", static_cast<std::int64_t>(config.base_train.batch_size));
  kv.set_int("epochs", static_cast<std::int64_t>(config.base_train.epochs));
  kv.set_double("dropout", config.base_train.dropout);
  kv.set_int("patience", static_cast<std::int64_t>(config.base_train.patience));
  return kv;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;

  // fail fast before any computation
  for (const auto& [path, what] :
       {std::pair{config.log_path, "log"}, {config.schema_path, "schema"},
        {config.constraint_path, "constraint"}}) {
    if (!fs::exists(path)) {
      throw ConfigError(std::string(what) + " file not found: " + path.string());
    }
  }
  if (config.approaches.empty()) throw ConfigError("run_experiment: no approaches selected");
  if (config.out_dir.empty()) throw ConfigError("run_experiment: no output directory");
  fs::create_directories(config.out_dir);

  const LogSchema schema = load_log_schema(config.schema_path);
  const TemporalConstraint constraint = load_constraint(config.constraint_path);
  EventLog log = load_log(config.log_path, schema);
  log = remove_incomplete_cases(
      log, std::set<std::string>(config.end_activities.begin(), config.end_activities.end()));

  const std::vector<LabeledCase> cases = label_log(log, constraint);
  auto [train_cases, test_cases] =
      split_log(cases, config.split_fraction, config.split_mode, config.seed);

  const std::size_t cap = prefix_cap_for(train_cases, config);
  const auto train_prefixes = generate_prefixes(train_cases, cap, config.min_prefix_len);
  const auto test_prefixes = generate_prefixes(test_cases, cap, config.min_prefix_len);
  if (train_prefixes.empty()) throw ConfigError("run_experiment: no training prefixes");
  if (test_prefixes.empty()) throw ConfigError("run_experiment: no test prefixes");

  const auto attribute_schema = schema.attribute_map();
  const EncoderSpec encoder = fit_encoder(train_prefixes, attribute_schema);
  const FeatureMatrix train_matrix = encode(train_prefixes, encoder);
  const FeatureMatrix test_matrix = encode(test_prefixes, encoder);

  std::ofstream trials_log(config.out_dir / "trials.log");
  if (!trials_log) throw ConfigError("cannot write trials.log");
  trials_log << "approach,trial,hidden,learning_rate,dropout,batch_size,seed,metric,best\n";

  ExperimentResult result;
  result.prefix_cap = cap;
  result.n_train_cases = train_cases.size();
  result.n_test_cases = test_cases.size();

  std::vector<EvalReport> reports;
  for (const Mode approach : config.approaches) {
    TrainConfig final_config = config.base_train;
    if (config.trials > 0) {
      const SearchResult search =
          random_search(train_cases, config, attribute_schema, approach);
      for (const auto& trial : search.trials) {
        trials_log << mode_name(approach) << "," << trial.index << ","
                   << hidden_to_string(trial.config.hidden_sizes, "/") << ","
                   << fmt_double(trial.config.learning_rate) << ","
                   << fmt_double(trial.config.dropout) << "," << trial.config.batch_size << ","
                   << trial.config.seed << ","
                   << (trial.metric ? fmt_double(*trial.metric) : std::string("n/a")) << ","
                   << (trial.index == search.best_index ? 1 : 0) << "\n";
      }
      final_config = search.best;
    }
    final_config.seed = mix_seed(approach_stream_seed(config.seed, approach), 0xF17A1);

    Trainer trainer(make_model(approach, encoder.feature_count(), final_config), final_config);
    trainer.fit(train_matrix);

    EvalReport report = evaluate_run(trainer.model(), test_matrix);
    reports.push_back(report);

    const std::string name = mode_name(approach);
    save_model(trainer.model(), encoder, schema, final_config, cap,
               config.out_dir / ("model." + name));
    save_encoder(encoder, config.out_dir / ("encoder." + name));
    std::ofstream predictions(config.out_dir / ("predictions." + name + ".cols"));
    if (!predictions) throw ConfigError("cannot write predictions file");
    write_predictions(report, predictions);

    result.artifacts.push_back(
        {approach, final_config, encoder_digest(encoder), std::move(report)});
  }

  {
    std::ofstream table(config.out_dir / "report.txt");
    if (!table) throw ConfigError("cannot write report.txt");
    table << "constraint: " << constraint.id << "  cases: " << cases.size()
          << "  train: " << train_cases.size() << "  test: " << test_cases.size()
          << "  prefix cap: " << cap << "\n";
    write_report_table(reports, table);

    std::ofstream cols(config.out_dir / "report.cols");
    if (!cols) throw ConfigError("cannot write report.cols");
    write_report_columns(reports, cols);

    manifest_from_config(config).save(config.out_dir / "manifest");
  }
  return result;
}

}  // namespace pcm
