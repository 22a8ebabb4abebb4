#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "pcm/constraint.hpp"
#include "pcm/event_log.hpp"

namespace pcm {

// A completed case after outcome evaluation and trace cutting. label and
// magnitude always agree: label == 1 iff magnitude_seconds > 0.
struct LabeledCase {
  std::string case_id;
  Trace cut_trace;
  int label = 0;
  std::int64_t magnitude_seconds = 0;
  ViolationKind kind = ViolationKind::None;
};

struct LabeledPrefix {
  std::string case_id;
  Trace prefix;  // first prefix_len events of the parent's cut trace
  std::size_t prefix_len = 0;
  int label = 0;
  std::int64_t magnitude_seconds = 0;
};

std::vector<LabeledCase> label_log(const EventLog& log, const TemporalConstraint& constraint);

// Nearest-rank order statistic over the cut-trace lengths of positive
// cases. Throws ConfigError when there are no positives (an explicit
// max-length override is required then).
std::size_t max_prefix_length(const std::vector<LabeledCase>& cases, double percentile = 0.90);

// Prefixes of lengths min_len..min(max_len, |cut_trace|) per case, in case
// order then ascending length; cases shorter than min_len yield nothing.
std::vector<LabeledPrefix> generate_prefixes(const std::vector<LabeledCase>& cases,
                                             std::size_t max_len, std::size_t min_len = 1);

// Columnar dump: the log's own columns plus label, magnitude_seconds and
// prefix_len; one row per prefix event, prefixes in generation order.
void write_prefix_dump(const std::vector<LabeledPrefix>& prefixes, const LogSchema& schema,
                       std::ostream& out);

}  // namespace pcm
