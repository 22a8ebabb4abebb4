#include "pcm/event_log.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "pcm/errors.hpp"
#include "pcm/kv.hpp"
#include "pcm/timestamp.hpp"

namespace pcm {

std::map<std::string, AttrType> LogSchema::attribute_map() const {
  std::map<std::string, AttrType> m;
  for (const auto& [name, type] : attributes) m.emplace(name, type);
  return m;
}

namespace {

AttrType attr_type_from_string(const std::string& s, const std::string& origin) {
  if (s == "categorical") return AttrType::Categorical;
  if (s == "numerical") return AttrType::Numerical;
  throw ConfigError(origin + ": unknown column type '" + s +
                    "' (expected categorical or numerical)");
}

const char* attr_type_name(AttrType t) {
  return t == AttrType::Categorical ? "categorical" : "numerical";
}

}  // namespace

LogSchema parse_log_schema(std::istream& in, const std::string& origin) {
  KvFile kv = KvFile::parse(in, origin);
  LogSchema schema;
  for (const auto& key : kv.keys()) {
    const std::string& value = kv.get(key);
    if (key == "delimiter") {
      if (value == "tab") {
        schema.delimiter = '\t';
      } else if (value.size() == 1) {
        schema.delimiter = value[0];
      } else {
        throw ConfigError(origin + ": delimiter must be a single character or 'tab'");
      }
    } else if (key == "case") {
      schema.case_column = value;
    } else if (key == "activity") {
      schema.activity_column = value;
    } else if (key == "timestamp") {
      schema.timestamp_column = value;
    } else if (key == "timestamp_format") {
      schema.timestamp_format = value;
    } else if (key.rfind("attr.", 0) == 0) {
      std::string name = key.substr(5);
      if (name.empty()) throw ConfigError(origin + ": empty attribute name");
      schema.attributes.emplace_back(name, attr_type_from_string(value, origin));
    } else {
      throw ConfigError(origin + ": unknown schema key '" + key + "'");
    }
  }
  return schema;
}

LogSchema load_log_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file: " + path.string());
  return parse_log_schema(in, path.string());
}

void save_log_schema(const LogSchema& schema, const std::filesystem::path& path) {
  KvFile kv;
  kv.set("delimiter", schema.delimiter == '\t' ? "tab" : std::string(1, schema.delimiter));
  kv.set("case", schema.case_column);
  kv.set("activity", schema.activity_column);
  kv.set("timestamp", schema.timestamp_column);
  kv.set("timestamp_format", schema.timestamp_format);
  for (const auto& [name, type] : schema.attributes) {
    kv.set("attr." + name, attr_type_name(type));
  }
  kv.save(path);
}

namespace {

// One record = one physical line; quoted fields may embed the delimiter and
// doubled quotes, but not newlines.
std::vector<std::string> split_row(const std::string& line, char delim, int lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  std::size_t i = 0;
  bool field_start = true;
  while (i < line.size()) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          i += 2;
        } else {
          quoted = false;
          ++i;
        }
      } else {
        cur += c;
        ++i;
      }
    } else if (c == '"' && field_start) {
      quoted = true;
      field_start = false;
      ++i;
    } else if (c == delim) {
      fields.push_back(cur);
      cur.clear();
      field_start = true;
      ++i;
    } else {
      cur += c;
      field_start = false;
      ++i;
    }
  }
  if (quoted) {
    throw ParseError("line " + std::to_string(lineno) + ": unterminated quote");
  }
  fields.push_back(cur);
  return fields;
}

std::string quote_field(const std::string& value, char delim) {
  bool needs = value.find(delim) != std::string::npos ||
               value.find('"') != std::string::npos;
  if (!needs) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

EventLog parse_log(std::istream& source, const LogSchema& schema) {
  std::string header_line;
  if (!std::getline(source, header_line)) {
    throw ParseError("line 1: missing header row");
  }
  if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();

  const auto attr_types = schema.attribute_map();
  std::vector<std::string> header = split_row(header_line, schema.delimiter, 1);

  int case_idx = -1, activity_idx = -1, timestamp_idx = -1;
  // column index -> attribute name for extra columns
  std::vector<std::pair<int, std::string>> attr_columns;
  std::set<std::string> seen_columns;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    const std::string& name = header[i];
    if (!seen_columns.insert(name).second) {
      throw ParseError("line 1: duplicate column '" + name + "'");
    }
    if (name == schema.case_column) {
      case_idx = i;
    } else if (name == schema.activity_column) {
      activity_idx = i;
    } else if (name == schema.timestamp_column) {
      timestamp_idx = i;
    } else if (attr_types.count(name)) {
      attr_columns.emplace_back(i, name);
    } else {
      throw ParseError("line 1: column '" + name + "' is not declared in the schema");
    }
  }
  if (case_idx < 0) throw ParseError("line 1: missing case column '" + schema.case_column + "'");
  if (activity_idx < 0) throw ParseError("line 1: missing activity column '" + schema.activity_column + "'");
  if (timestamp_idx < 0) throw ParseError("line 1: missing timestamp column '" + schema.timestamp_column + "'");
  for (const auto& [name, type] : schema.attributes) {
    (void)type;
    bool found = false;
    for (const auto& [idx, col] : attr_columns) {
      (void)idx;
      if (col == name) { found = true; break; }
    }
    if (!found) throw ParseError("line 1: missing declared attribute column '" + name + "'");
  }

  EventLog log;
  log.attribute_schema = attr_types;
  std::map<std::string, std::size_t> trace_index;

  std::string line;
  int lineno = 1;
  while (std::getline(source, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_row(line, schema.delimiter, lineno);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }

    Event ev;
    ev.case_id = fields[case_idx];
    ev.activity = fields[activity_idx];
    if (ev.case_id.empty()) {
      throw ParseError("line " + std::to_string(lineno) + ": empty case id");
    }
    if (ev.activity.empty()) {
      throw ParseError("line " + std::to_string(lineno) + ": empty activity");
    }
    try {
      ev.timestamp = parse_timestamp(fields[timestamp_idx], schema.timestamp_format);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }

    for (const auto& [idx, name] : attr_columns) {
      const std::string& raw = fields[idx];
      AttrType type = attr_types.at(name);
      if (type == AttrType::Categorical) {
        ev.attributes[name] = raw.empty() ? kMissingToken : raw;
      } else {
        if (raw.empty()) continue;  // absent numerical value
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
        if (ec != std::errc() || ptr != raw.data() + raw.size()) {
          throw ParseError("line " + std::to_string(lineno) + ": bad numerical value '" +
                           raw + "' for attribute '" + name + "'");
        }
        ev.attributes[name] = value;
      }
    }

    auto it = trace_index.find(ev.case_id);
    if (it == trace_index.end()) {
      trace_index.emplace(ev.case_id, log.traces.size());
      log.traces.push_back(Trace{ev.case_id, {}});
      it = trace_index.find(ev.case_id);
    }
    log.traces[it->second].events.push_back(std::move(ev));
  }

  for (auto& trace : log.traces) {
    std::stable_sort(trace.events.begin(), trace.events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
  }
  return log;
}

EventLog load_log(const std::filesystem::path& path, const LogSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open log file: " + path.string());
  return parse_log(in, schema);
}

void write_log(const EventLog& log, const LogSchema& schema, std::ostream& out) {
  const char d = schema.delimiter;
  out << quote_field(schema.case_column, d) << d
      << quote_field(schema.activity_column, d) << d
      << quote_field(schema.timestamp_column, d);
  for (const auto& [name, type] : schema.attributes) {
    (void)type;
    out << d << quote_field(name, d);
  }
  out << "\n";

  for (const auto& trace : log.traces) {
    for (const auto& ev : trace.events) {
      out << quote_field(ev.case_id, d) << d << quote_field(ev.activity, d) << d
          << format_timestamp(ev.timestamp, schema.timestamp_format);
      for (const auto& [name, type] : schema.attributes) {
        out << d;
        auto it = ev.attributes.find(name);
        if (it == ev.attributes.end()) continue;  // absent -> empty field
        if (type == AttrType::Categorical) {
          const std::string& value = std::get<std::string>(it->second);
          // missing placeholder round-trips back to an empty field
          out << (value == kMissingToken ? "" : quote_field(value, d));
        } else {
          out << format_double(std::get<double>(it->second));
        }
      }
      out << "\n";
    }
  }
}

void save_log(const EventLog& log, const LogSchema& schema, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write log file: " + path.string());
  write_log(log, schema, out);
}

EventLog remove_incomplete_cases(const EventLog& log, const std::set<std::string>& end_activities) {
  if (end_activities.empty()) return log;
  EventLog out;
  out.attribute_schema = log.attribute_schema;
  for (const auto& trace : log.traces) {
    if (!trace.events.empty() && end_activities.count(trace.events.back().activity)) {
      out.traces.push_back(trace);
    }
  }
  return out;
}

std::int64_t trace_duration(const Trace& trace) {
  if (trace.events.empty()) {
    throw ContractViolation("trace_duration: trace '" + trace.case_id + "' has no events");
  }
  return trace.events.back().timestamp - trace.events.front().timestamp;
}

}  // namespace pcm
