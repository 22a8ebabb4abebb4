#include "pcm/constraint.hpp"

#include <algorithm>
#include <fstream>

#include "pcm/errors.hpp"
#include "pcm/kv.hpp"

namespace pcm {

namespace {

constexpr std::size_t kNotFound = static_cast<std::size_t>(-1);

std::size_t find_first(const Trace& trace, const std::string& activity, std::size_t from = 0) {
  for (std::size_t i = from; i < trace.events.size(); ++i) {
    if (trace.events[i].activity == activity) return i;
  }
  return kNotFound;
}

}  // namespace

ComplianceOutcome evaluate(const TemporalConstraint& constraint, const Trace& trace) {
  ComplianceOutcome outcome;

  const std::size_t anchor = find_first(trace, constraint.anchor_activity);
  if (anchor == kNotFound) {
    return outcome;  // vacuously satisfied
  }

  const std::size_t target = find_first(trace, constraint.target_activity, anchor);
  if (target == kNotFound) {
    outcome.status = ComplianceStatus::Deviant;
    outcome.kind = ViolationKind::ControlFlow;
    // magnitude floor keeps Deviant => magnitude > 0 for zero-duration traces
    outcome.magnitude_seconds = std::max<std::int64_t>(trace_duration(trace), 1);
    return outcome;
  }

  const std::int64_t gap = trace.events[target].timestamp - trace.events[anchor].timestamp;
  std::int64_t overshoot = 0;
  if (constraint.pattern == Pattern::MaxDistance) {
    overshoot = gap - constraint.bound_seconds;
  } else {
    overshoot = constraint.bound_seconds - gap;
  }
  if (overshoot > 0) {
    outcome.status = ComplianceStatus::Deviant;
    outcome.kind = ViolationKind::Temporal;
    outcome.magnitude_seconds = overshoot;
  }
  return outcome;
}

std::size_t cut_point(const TemporalConstraint& constraint, const Trace& trace) {
  const std::size_t n = trace.events.size();
  const std::size_t anchor = find_first(trace, constraint.anchor_activity);
  if (anchor == kNotFound) {
    return n;  // label already fixed to Normal, nothing to hide
  }

  std::size_t cut = n;
  if (constraint.pattern == Pattern::MaxDistance) {
    const std::int64_t deadline = trace.events[anchor].timestamp + constraint.bound_seconds;
    for (std::size_t i = anchor; i < n; ++i) {
      if (trace.events[i].timestamp > deadline ||
          trace.events[i].activity == constraint.target_activity) {
        cut = i;
        break;
      }
    }
  } else {
    const std::size_t target = find_first(trace, constraint.target_activity, anchor);
    if (target != kNotFound) cut = target;
  }
  return std::max<std::size_t>(cut, 1);
}

TemporalConstraint parse_constraint(std::istream& in, const std::string& origin) {
  KvFile kv = KvFile::parse(in, origin);
  for (const auto& key : kv.keys()) {
    if (key != "id" && key != "anchor" && key != "target" && key != "pattern" && key != "bound") {
      throw ConfigError(origin + ": unknown constraint key '" + key + "'");
    }
  }
  TemporalConstraint c;
  c.id = kv.get("id");
  c.anchor_activity = kv.get("anchor");
  c.target_activity = kv.get("target");
  const std::string pattern = kv.get("pattern");
  if (pattern == "max_distance") {
    c.pattern = Pattern::MaxDistance;
  } else if (pattern == "min_distance") {
    c.pattern = Pattern::MinDistance;
  } else {
    throw ConfigError(origin + ": pattern must be max_distance or min_distance, got '" +
                      pattern + "'");
  }
  c.bound_seconds = parse_duration_seconds(kv.get("bound"));
  if (c.bound_seconds <= 0) {
    throw ConfigError(origin + ": bound must be positive");
  }
  return c;
}

TemporalConstraint load_constraint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open constraint file: " + path.string());
  return parse_constraint(in, path.string());
}

void save_constraint(const TemporalConstraint& constraint, const std::filesystem::path& path) {
  KvFile kv;
  kv.set("id", constraint.id);
  kv.set("anchor", constraint.anchor_activity);
  kv.set("target", constraint.target_activity);
  kv.set("pattern", constraint.pattern == Pattern::MaxDistance ? "max_distance" : "min_distance");
  kv.set("bound", std::to_string(constraint.bound_seconds) + "s");
  kv.save(path);
}

}  // namespace pcm
