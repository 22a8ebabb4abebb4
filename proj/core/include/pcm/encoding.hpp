#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pcm/event_log.hpp"
#include "pcm/labeling.hpp"

namespace pcm {

// Calendar and elapsed-time features of one event. Elapsed values are 0 for
// the first event of a case.
struct TimeFeatures {
  double month = 0;    // 1..12
  double weekday = 0;  // 0 = Monday .. 6 = Sunday
  double hour = 0;     // 0..23
  double since_start_seconds = 0;
  double since_prev_seconds = 0;
};

TimeFeatures extract_time_features(const Event& event, std::int64_t case_start_ts,
                                   std::int64_t prev_event_ts);

struct EncodeOptions {
  // additionally expose month/weekday/hour of the prefix's last event as
  // scalar features
  bool last_event_time_features = false;
};

// Frozen vocabulary, feature layout and normalization statistics, fitted on
// training prefixes only.
struct EncoderSpec {
  EncodeOptions options;
  std::map<std::string, AttrType> schema;  // event attributes (without activity/time)
  std::map<std::string, std::vector<std::string>> categorical_vocab;  // sorted values
  std::vector<std::string> numeric_attrs;                             // sorted
  std::vector<std::string> feature_names;  // final layout, one entry per column
  std::vector<double> norm_mean;
  std::vector<double> norm_std;            // population std; 0 marks a constant column

  std::size_t feature_count() const { return feature_names.size(); }
};

struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major
  std::vector<int> labels;
  std::vector<double> magnitudes_days;
  std::vector<std::string> case_ids;
  std::vector<std::size_t> prefix_lens;
  std::vector<std::string> feature_names;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values.data() + i * cols, cols);
  }
};

EncoderSpec fit_encoder(const std::vector<LabeledPrefix>& train_prefixes,
                        const std::map<std::string, AttrType>& schema,
                        const EncodeOptions& options = {});

FeatureMatrix encode(const std::vector<LabeledPrefix>& prefixes, const EncoderSpec& spec);

// features of one prefix before z-scoring, in layout order
std::vector<double> encode_raw(const LabeledPrefix& prefix, const EncoderSpec& spec);

std::string encoder_to_json(const EncoderSpec& spec);
EncoderSpec encoder_from_json(const std::string& text);
void save_encoder(const EncoderSpec& spec, const std::filesystem::path& path);
EncoderSpec load_encoder(const std::filesystem::path& path);

// stable content hash of the serialized spec
std::string encoder_digest(const EncoderSpec& spec);

// debug export: feature columns plus label/magnitude/bookkeeping
void write_feature_matrix(const FeatureMatrix& matrix, std::ostream& out);

}  // namespace pcm
