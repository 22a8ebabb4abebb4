#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace pcm {

enum class AttrType { Categorical, Numerical };

// categorical -> string, numerical -> double; numerical values missing from
// a row are simply absent from the event's attribute map
using AttrValue = std::variant<std::string, double>;

// placeholder stored for categorical values missing from a row
inline const std::string kMissingToken = "\xE2\x8A\xA5missing";   // ⊥missing
// reserved vocabulary slot for values first seen at encode time
inline const std::string kUnseenToken = "\xE2\x8A\xA5unseen";     // ⊥unseen

struct Event {
  std::string activity;
  std::string case_id;
  std::int64_t timestamp = 0;  // UTC unix seconds
  std::map<std::string, AttrValue> attributes;

  bool operator==(const Event&) const = default;
};

struct Trace {
  std::string case_id;
  std::vector<Event> events;  // ascending by timestamp, stable on ties

  bool operator==(const Trace&) const = default;
};

struct EventLog {
  std::vector<Trace> traces;
  std::map<std::string, AttrType> attribute_schema;

  bool operator==(const EventLog&) const = default;
};

// Column roles and attribute types for the delimiter-separated log format.
struct LogSchema {
  char delimiter = ',';
  std::string case_column = "case_id";
  std::string activity_column = "activity";
  std::string timestamp_column = "timestamp";
  std::string timestamp_format = "%Y-%m-%dT%H:%M:%S%z";
  std::vector<std::pair<std::string, AttrType>> attributes;  // declared order

  std::map<std::string, AttrType> attribute_map() const;
};

LogSchema load_log_schema(const std::filesystem::path& path);
LogSchema parse_log_schema(std::istream& in, const std::string& origin);
void save_log_schema(const LogSchema& schema, const std::filesystem::path& path);

EventLog parse_log(std::istream& source, const LogSchema& schema);
EventLog load_log(const std::filesystem::path& path, const LogSchema& schema);

void write_log(const EventLog& log, const LogSchema& schema, std::ostream& out);
void save_log(const EventLog& log, const LogSchema& schema, const std::filesystem::path& path);

// Keeps traces whose last activity is in `end_activities`; an empty set
// keeps everything. Trace order is preserved.
EventLog remove_incomplete_cases(const EventLog& log, const std::set<std::string>& end_activities);

// last timestamp minus first, in seconds; throws ContractViolation on an
// empty trace
std::int64_t trace_duration(const Trace& trace);

}  // namespace pcm
