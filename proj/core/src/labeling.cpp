#include "pcm/labeling.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "pcm/errors.hpp"
#include "pcm/timestamp.hpp"

namespace pcm {

std::vector<LabeledCase> label_log(const EventLog& log, const TemporalConstraint& constraint) {
  std::vector<LabeledCase> cases;
  cases.reserve(log.traces.size());
  for (const auto& trace : log.traces) {
    const ComplianceOutcome outcome = evaluate(constraint, trace);
    const std::size_t keep = cut_point(constraint, trace);

    LabeledCase lc;
    lc.case_id = trace.case_id;
    lc.cut_trace.case_id = trace.case_id;
    lc.cut_trace.events.assign(trace.events.begin(), trace.events.begin() + keep);
    lc.label = outcome.status == ComplianceStatus::Deviant ? 1 : 0;
    lc.magnitude_seconds = outcome.magnitude_seconds;
    lc.kind = outcome.kind;
    cases.push_back(std::move(lc));
  }
  return cases;
}

std::size_t max_prefix_length(const std::vector<LabeledCase>& cases, double percentile) {
  std::vector<std::size_t> positive_lengths;
  for (const auto& c : cases) {
    if (c.label == 1) positive_lengths.push_back(c.cut_trace.events.size());
  }
  if (positive_lengths.empty()) {
    throw ConfigError(
        "max_prefix_length: no positive cases; pass an explicit maximum prefix length");
  }
  std::sort(positive_lengths.begin(), positive_lengths.end());
  const double n = static_cast<double>(positive_lengths.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile * n));  // 1-based
  rank = std::clamp<std::size_t>(rank, 1, positive_lengths.size());
  return positive_lengths[rank - 1];
}

std::vector<LabeledPrefix> generate_prefixes(const std::vector<LabeledCase>& cases,
                                             std::size_t max_len, std::size_t min_len) {
  if (min_len < 1 || max_len < min_len) {
    throw ContractViolation("generate_prefixes: need max_len >= min_len >= 1");
  }
  std::vector<LabeledPrefix> prefixes;
  for (const auto& c : cases) {
    const std::size_t limit = std::min(max_len, c.cut_trace.events.size());
    for (std::size_t k = min_len; k <= limit; ++k) {
      LabeledPrefix p;
      p.case_id = c.case_id;
      p.prefix.case_id = c.case_id;
      p.prefix.events.assign(c.cut_trace.events.begin(), c.cut_trace.events.begin() + k);
      p.prefix_len = k;
      p.label = c.label;
      p.magnitude_seconds = c.magnitude_seconds;
      prefixes.push_back(std::move(p));
    }
  }
  return prefixes;
}

namespace {

std::string csv_field(const std::string& value, char delim) {
  if (value.find(delim) == std::string::npos && value.find('"') == std::string::npos) {
    return value;
  }
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

}  // namespace

void write_prefix_dump(const std::vector<LabeledPrefix>& prefixes, const LogSchema& schema,
                       std::ostream& out) {
  const char d = schema.delimiter;
  out << csv_field(schema.case_column, d) << d << csv_field(schema.activity_column, d) << d
      << csv_field(schema.timestamp_column, d);
  for (const auto& [name, type] : schema.attributes) {
    (void)type;
    out << d << csv_field(name, d);
  }
  out << d << "label" << d << "magnitude_seconds" << d << "prefix_len\n";

  for (const auto& p : prefixes) {
    for (const auto& ev : p.prefix.events) {
      out << csv_field(ev.case_id, d) << d << csv_field(ev.activity, d) << d
          << format_timestamp(ev.timestamp, schema.timestamp_format);
      for (const auto& [name, type] : schema.attributes) {
        out << d;
        auto it = ev.attributes.find(name);
        if (it == ev.attributes.end()) continue;
        if (type == AttrType::Categorical) {
          const std::string& value = std::get<std::string>(it->second);
          out << (value == kMissingToken ? "" : csv_field(value, d));
        } else {
          char buf[32];
          auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), std::get<double>(it->second));
          (void)ec;
          out << std::string(buf, ptr);
        }
      }
      out << d << p.label << d << p.magnitude_seconds << d << p.prefix_len << "\n";
    }
  }
}

}  // namespace pcm
