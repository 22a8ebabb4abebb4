#include "pcm/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pcm/errors.hpp"
#include "pcm/timestamp.hpp"
#include "serial_util.hpp"

namespace pcm {

namespace {

using OrderedJson = nlohmann::ordered_json;

constexpr const char* kActivityAttr = "activity";
const std::vector<std::string> kTimeAttrs = {"t:hour", "t:month", "t:since_prev",
                                             "t:since_start", "t:weekday"};
const std::vector<std::string> kLastEventAttrs = {"tlast:hour", "tlast:month", "tlast:weekday"};

void validate_attr_names(const std::map<std::string, AttrType>& schema) {
  for (const auto& [name, type] : schema) {
    (void)type;
    if (name == kActivityAttr || name == "prefix_len" || name.rfind("t:", 0) == 0 ||
        name.rfind("tlast:", 0) == 0) {
      throw ConfigError("attribute name '" + name + "' is reserved");
    }
  }
}

struct Accumulated {
  std::map<std::string, std::map<std::string, double>> counts;   // categorical
  std::map<std::string, std::vector<double>> numeric;            // per-attr samples
  TimeFeatures last;
};

Accumulated accumulate(const LabeledPrefix& prefix, const std::map<std::string, AttrType>& schema) {
  if (prefix.prefix.events.empty()) {
    throw ContractViolation("encode: prefix of case '" + prefix.case_id + "' is empty");
  }
  Accumulated acc;
  const std::int64_t start = prefix.prefix.events.front().timestamp;
  std::int64_t prev = start;
  for (std::size_t i = 0; i < prefix.prefix.events.size(); ++i) {
    const Event& ev = prefix.prefix.events[i];
    acc.counts[kActivityAttr][ev.activity] += 1.0;

    const TimeFeatures tf = extract_time_features(ev, start, i == 0 ? ev.timestamp : prev);
    acc.numeric["t:hour"].push_back(tf.hour);
    acc.numeric["t:month"].push_back(tf.month);
    acc.numeric["t:since_prev"].push_back(tf.since_prev_seconds);
    acc.numeric["t:since_start"].push_back(tf.since_start_seconds);
    acc.numeric["t:weekday"].push_back(tf.weekday);
    acc.last = tf;
    prev = ev.timestamp;

    for (const auto& [name, value] : ev.attributes) {
      auto it = schema.find(name);
      if (it == schema.end()) {
        throw ContractViolation("encode: attribute '" + name + "' is not in the schema");
      }
      if (it->second == AttrType::Categorical) {
        if (!std::holds_alternative<std::string>(value)) {
          throw ContractViolation("encode: attribute '" + name + "' should be categorical");
        }
        acc.counts[name][std::get<std::string>(value)] += 1.0;
      } else {
        if (!std::holds_alternative<double>(value)) {
          throw ContractViolation("encode: attribute '" + name + "' should be numerical");
        }
        acc.numeric[name].push_back(std::get<double>(value));
      }
    }
  }
  return acc;
}

// Population mean/std; empty -> (0, 0). Samples are summed in sorted order
// so the result is bit-identical for any permutation of the same multiset.
std::pair<double, double> mean_std(std::vector<double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  std::sort(xs.begin(), xs.end());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, std::sqrt(var)};
}

}  // namespace

TimeFeatures extract_time_features(const Event& event, std::int64_t case_start_ts,
                                   std::int64_t prev_event_ts) {
  const CivilTime c = civil_from_unix(event.timestamp);
  TimeFeatures tf;
  tf.month = static_cast<double>(c.month);
  tf.weekday = static_cast<double>(weekday_monday0(event.timestamp));
  tf.hour = static_cast<double>(c.hour);
  tf.since_start_seconds = static_cast<double>(event.timestamp - case_start_ts);
  tf.since_prev_seconds = static_cast<double>(event.timestamp - prev_event_ts);
  return tf;
}

EncoderSpec fit_encoder(const std::vector<LabeledPrefix>& train_prefixes,
                        const std::map<std::string, AttrType>& schema,
                        const EncodeOptions& options) {
  if (train_prefixes.empty()) {
    throw ConfigError("fit_encoder: no training prefixes");
  }
  validate_attr_names(schema);

  EncoderSpec spec;
  spec.options = options;
  spec.schema = schema;

  // vocabulary pass
  std::map<std::string, std::set<std::string>> vocab_sets;
  vocab_sets[kActivityAttr] = {};
  for (const auto& [name, type] : schema) {
    if (type == AttrType::Categorical) vocab_sets[name] = {};
  }
  for (const auto& prefix : train_prefixes) {
    for (const auto& ev : prefix.prefix.events) {
      vocab_sets[kActivityAttr].insert(ev.activity);
      for (const auto& [name, value] : ev.attributes) {
        auto it = schema.find(name);
        if (it == schema.end()) {
          throw ContractViolation("fit_encoder: attribute '" + name + "' is not in the schema");
        }
        if (it->second == AttrType::Categorical) {
          vocab_sets[name].insert(std::get<std::string>(value));
        }
      }
    }
  }
  for (const auto& [attr, values] : vocab_sets) {
    spec.categorical_vocab[attr] = std::vector<std::string>(values.begin(), values.end());
  }

  for (const auto& [name, type] : schema) {
    if (type == AttrType::Numerical) spec.numeric_attrs.push_back(name);
  }
  spec.numeric_attrs.insert(spec.numeric_attrs.end(), kTimeAttrs.begin(), kTimeAttrs.end());
  std::sort(spec.numeric_attrs.begin(), spec.numeric_attrs.end());

  // layout: categorical frequencies, numeric mean/std, optional last-event
  // scalars, prefix_len
  for (const auto& [attr, values] : spec.categorical_vocab) {
    for (const auto& v : values) spec.feature_names.push_back(attr + "=" + v);
    spec.feature_names.push_back(attr + "=" + kUnseenToken);
  }
  for (const auto& attr : spec.numeric_attrs) {
    spec.feature_names.push_back(attr + ":mean");
    spec.feature_names.push_back(attr + ":std");
  }
  if (options.last_event_time_features) {
    for (const auto& name : kLastEventAttrs) spec.feature_names.push_back(name);
  }
  spec.feature_names.push_back("prefix_len");

  // normalization statistics over the raw training encodings
  const std::size_t cols = spec.feature_names.size();
  const double n = static_cast<double>(train_prefixes.size());
  std::vector<double> sums(cols, 0.0);
  std::vector<std::vector<double>> raw_rows;
  raw_rows.reserve(train_prefixes.size());
  for (const auto& prefix : train_prefixes) {
    raw_rows.push_back(encode_raw(prefix, spec));
    for (std::size_t j = 0; j < cols; ++j) sums[j] += raw_rows.back()[j];
  }
  spec.norm_mean.resize(cols);
  for (std::size_t j = 0; j < cols; ++j) spec.norm_mean[j] = sums[j] / n;
  std::vector<double> sq(cols, 0.0);
  for (const auto& row : raw_rows) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double d = row[j] - spec.norm_mean[j];
      sq[j] += d * d;
    }
  }
  spec.norm_std.resize(cols);
  for (std::size_t j = 0; j < cols; ++j) spec.norm_std[j] = std::sqrt(sq[j] / n);

  return spec;
}

std::vector<double> encode_raw(const LabeledPrefix& prefix, const EncoderSpec& spec) {
  Accumulated acc = accumulate(prefix, spec.schema);

  std::vector<double> out;
  out.reserve(spec.feature_count());

  for (const auto& [attr, vocab] : spec.categorical_vocab) {
    std::vector<double> freqs(vocab.size(), 0.0);
    double unseen = 0.0;
    auto cit = acc.counts.find(attr);
    if (cit != acc.counts.end()) {
      for (const auto& [value, count] : cit->second) {
        auto vit = std::lower_bound(vocab.begin(), vocab.end(), value);
        if (vit != vocab.end() && *vit == value) {
          freqs[static_cast<std::size_t>(vit - vocab.begin())] = count;
        } else {
          unseen += count;
        }
      }
    }
    out.insert(out.end(), freqs.begin(), freqs.end());
    out.push_back(unseen);
  }

  for (const auto& attr : spec.numeric_attrs) {
    auto nit = acc.numeric.find(attr);
    const auto [mean, std_dev] = nit == acc.numeric.end() ? std::pair<double, double>{0.0, 0.0}
                                                          : mean_std(std::move(nit->second));
    out.push_back(mean);
    out.push_back(std_dev);
  }

  if (spec.options.last_event_time_features) {
    out.push_back(acc.last.hour);
    out.push_back(acc.last.month);
    out.push_back(acc.last.weekday);
  }

  out.push_back(static_cast<double>(prefix.prefix.events.size()));

  if (out.size() != spec.feature_count()) {
    throw ContractViolation("encode: layout mismatch");
  }
  return out;
}

FeatureMatrix encode(const std::vector<LabeledPrefix>& prefixes, const EncoderSpec& spec) {
  FeatureMatrix m;
  m.rows = prefixes.size();
  m.cols = spec.feature_count();
  m.feature_names = spec.feature_names;
  m.values.reserve(m.rows * m.cols);
  m.labels.reserve(m.rows);
  m.magnitudes_days.reserve(m.rows);
  m.case_ids.reserve(m.rows);
  m.prefix_lens.reserve(m.rows);

  for (const auto& prefix : prefixes) {
    std::vector<double> raw = encode_raw(prefix, spec);
    for (std::size_t j = 0; j < m.cols; ++j) {
      double z = spec.norm_std[j] == 0.0 ? 0.0 : (raw[j] - spec.norm_mean[j]) / spec.norm_std[j];
      if (!std::isfinite(z)) {
        throw ContractViolation("encode: non-finite feature '" + spec.feature_names[j] +
                                "' for case '" + prefix.case_id + "'");
      }
      m.values.push_back(z);
    }
    m.labels.push_back(prefix.label);
    m.magnitudes_days.push_back(static_cast<double>(prefix.magnitude_seconds) / 86400.0);
    m.case_ids.push_back(prefix.case_id);
    m.prefix_lens.push_back(prefix.prefix_len);
  }
  return m;
}

std::string encoder_to_json(const EncoderSpec& spec) {
  OrderedJson j;
  j["format"] = "pcm-encoder";
  j["version"] = 1;
  j["options"]["last_event_time_features"] = spec.options.last_event_time_features;
  OrderedJson schema = OrderedJson::object();
  for (const auto& [name, type] : spec.schema) {
    schema[name] = type == AttrType::Categorical ? "categorical" : "numerical";
  }
  j["schema"] = schema;
  OrderedJson vocab = OrderedJson::object();
  for (const auto& [attr, values] : spec.categorical_vocab) {
    vocab[attr] = values;
  }
  j["categorical_vocab"] = vocab;
  j["numeric_attrs"] = spec.numeric_attrs;
  j["feature_names"] = spec.feature_names;
  OrderedJson mean = OrderedJson::array();
  OrderedJson std_dev = OrderedJson::array();
  for (double v : spec.norm_mean) mean.push_back(detail::hex_from_double(v));
  for (double v : spec.norm_std) std_dev.push_back(detail::hex_from_double(v));
  j["norm_mean"] = mean;
  j["norm_std"] = std_dev;
  return j.dump(2) + "\n";
}

EncoderSpec encoder_from_json(const std::string& text) {
  OrderedJson j;
  try {
    j = OrderedJson::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("bad encoder document: ") + e.what());
  }
  if (!j.contains("format") || j["format"] != "pcm-encoder") {
    throw ConfigError("not an encoder document (missing format tag)");
  }
  if (!j.contains("version") || j["version"].get<int>() != 1) {
    throw ConfigError("unsupported encoder document version");
  }
  try {
    EncoderSpec spec;
    spec.options.last_event_time_features = j["options"]["last_event_time_features"].get<bool>();
    for (const auto& [name, type] : j["schema"].items()) {
      spec.schema[name] = type.get<std::string>() == "categorical" ? AttrType::Categorical
                                                                   : AttrType::Numerical;
    }
    for (const auto& [attr, values] : j["categorical_vocab"].items()) {
      spec.categorical_vocab[attr] = values.get<std::vector<std::string>>();
    }
    spec.numeric_attrs = j["numeric_attrs"].get<std::vector<std::string>>();
    spec.feature_names = j["feature_names"].get<std::vector<std::string>>();
    for (const auto& v : j["norm_mean"]) {
      spec.norm_mean.push_back(detail::double_from_hex(v.get<std::string>()));
    }
    for (const auto& v : j["norm_std"]) {
      spec.norm_std.push_back(detail::double_from_hex(v.get<std::string>()));
    }
    if (spec.norm_mean.size() != spec.feature_names.size() ||
        spec.norm_std.size() != spec.feature_names.size()) {
      throw ParseError("encoder document: inconsistent layout sizes");
    }
    return spec;
  } catch (const OrderedJson::exception& e) {
    throw ParseError(std::string("bad encoder document: ") + e.what());
  }
}

void save_encoder(const EncoderSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write encoder file: " + path.string());
  out << encoder_to_json(spec);
}

EncoderSpec load_encoder(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open encoder file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return encoder_from_json(buf.str());
}

std::string encoder_digest(const EncoderSpec& spec) {
  return detail::hex64(detail::fnv1a64(encoder_to_json(spec)));
}

void write_feature_matrix(const FeatureMatrix& matrix, std::ostream& out) {
  out << "case_id,prefix_len,label,magnitude_days";
  for (const auto& name : matrix.feature_names) out << "," << name;
  out << "\n";
  char buf[32];
  for (std::size_t i = 0; i < matrix.rows; ++i) {
    out << matrix.case_ids[i] << "," << matrix.prefix_lens[i] << "," << matrix.labels[i];
    std::snprintf(buf, sizeof(buf), "%.17g", matrix.magnitudes_days[i]);
    out << "," << buf;
    for (double v : matrix.row(i)) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace pcm
