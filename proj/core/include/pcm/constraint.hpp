#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>

#include "pcm/event_log.hpp"

namespace pcm {

// Eventually-follows distance constraint between two activities.
enum class Pattern { MaxDistance, MinDistance };

struct TemporalConstraint {
  std::string id;
  std::string anchor_activity;
  std::string target_activity;
  Pattern pattern = Pattern::MaxDistance;
  std::int64_t bound_seconds = 0;  // > 0
};

enum class ComplianceStatus { Normal, Deviant };
enum class ViolationKind { None, Temporal, ControlFlow };

struct ComplianceOutcome {
  ComplianceStatus status = ComplianceStatus::Normal;
  std::int64_t magnitude_seconds = 0;  // > 0 iff Deviant
  ViolationKind kind = ViolationKind::None;

  bool operator==(const ComplianceOutcome&) const = default;
};

// Evaluates a completed trace. First occurrences only: the anchor is the
// first event with the anchor activity, the target the first event with the
// target activity at or after the anchor's position. Anchor absent means
// the constraint is vacuously satisfied. Target absent is a control-flow
// violation whose magnitude is the case duration (floored at 1s so a
// deviant outcome always carries a positive magnitude).
ComplianceOutcome evaluate(const TemporalConstraint& constraint, const Trace& trace);

// Number of leading events that can be kept without revealing the outcome.
// MaxDistance: cut before the first post-anchor target or the first event
// past the anchor deadline, whichever comes first; the whole trace if
// neither exists. MinDistance: cut before the first post-anchor target,
// else the whole trace. Anchor absent keeps the whole trace. Never returns
// less than 1 on a non-empty trace.
std::size_t cut_point(const TemporalConstraint& constraint, const Trace& trace);

TemporalConstraint parse_constraint(std::istream& in, const std::string& origin);
TemporalConstraint load_constraint(const std::filesystem::path& path);
void save_constraint(const TemporalConstraint& constraint, const std::filesystem::path& path);

}  // namespace pcm
