#include "pcm/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pcm/errors.hpp"
#include "pcm/rng.hpp"

namespace pcm {

namespace {

enum class Branch { HappyCompliant, HappyDeviant, Cancel, LateCancel };

const char* branch_name(Branch b) {
  switch (b) {
    case Branch::HappyCompliant:
    case Branch::HappyDeviant: return "happy";
    case Branch::Cancel: return "cancel";
    case Branch::LateCancel: return "late_cancel";
  }
  return "happy";
}

std::int64_t positive_seconds(Rng& rng, double log_mean, double log_sigma) {
  return std::max<std::int64_t>(1, std::llround(rng.lognormal(log_mean, log_sigma)));
}

// rejection-sample the confirm->ship gap on the requested side of the bound
std::int64_t class_gap(Rng& rng, const GenSpec& spec, bool deviant) {
  for (int attempt = 0; attempt < spec.retry_budget; ++attempt) {
    std::int64_t gap;
    if (deviant) {
      gap = positive_seconds(rng, spec.deviant_gap_log_mean, spec.deviant_gap_log_sigma);
      if (gap > spec.bound_seconds) return gap;
    } else {
      gap = positive_seconds(rng, spec.compliant_gap_log_mean, spec.compliant_gap_log_sigma);
      if (gap <= spec.bound_seconds) return gap;
    }
  }
  throw GenerationError(std::string("gap distribution cannot realize a ") +
                        (deviant ? "deviant" : "compliant") + " case within " +
                        std::to_string(spec.retry_budget) + " attempts; adjust the "
                        "distribution parameters or the bound");
}

std::string make_case_id(std::size_t index, std::size_t total) {
  std::size_t width = std::to_string(total).size();
  std::string digits = std::to_string(index + 1);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return "case_" + digits;
}

}  // namespace

GenSpec table1_o2c_preset() { return GenSpec{}; }

bool is_valid_o2c_sequence(const Trace& trace) {
  static const std::vector<std::vector<std::string>> allowed = {
      {"receive PO", "confirm order", "ship goods", "send invoice", "receive payment"},
      {"receive PO", "cancel"},
      {"receive PO", "confirm order", "cancel"},
  };
  for (const auto& shape : allowed) {
    if (trace.events.size() != shape.size()) continue;
    bool match = true;
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (trace.events[i].activity != shape[i]) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

GeneratedLog generate(const GenSpec& spec) {
  if (spec.n_traces == 0) throw GenerationError("n_traces must be positive");
  if (spec.positive_ratio < 0.0 || spec.positive_ratio > 1.0) {
    throw GenerationError("positive_ratio must be in [0, 1]");
  }
  if (spec.cancel_probability < 0.0 || spec.late_cancel_probability < 0.0 ||
      spec.cancel_probability + spec.late_cancel_probability > 1.0) {
    throw GenerationError("cancel probabilities must be non-negative and sum to <= 1");
  }
  if (spec.signal_strength < 0.0 || spec.signal_strength > 1.0) {
    throw GenerationError("signal_strength must be in [0, 1]");
  }
  if (spec.bound_seconds <= 0) throw GenerationError("bound must be positive");

  const auto n = static_cast<std::int64_t>(spec.n_traces);
  const std::int64_t n_cancel = std::llround(spec.cancel_probability * static_cast<double>(n));
  const std::int64_t n_late = std::llround(spec.late_cancel_probability * static_cast<double>(n));
  const std::int64_t n_positive = std::llround(spec.positive_ratio * static_cast<double>(n));
  const std::int64_t n_temporal = n_positive - n_late;
  const std::int64_t n_compliant = n - n_cancel - n_late - n_temporal;
  if (n_temporal < 0) {
    throw GenerationError("late_cancel_probability exceeds positive_ratio; every late-cancel "
                          "case is already deviant");
  }
  if (n_compliant < 0) {
    throw GenerationError("positive_ratio plus cancel probabilities exceed 1");
  }

  std::vector<Branch> branches;
  branches.reserve(spec.n_traces);
  branches.insert(branches.end(), n_compliant, Branch::HappyCompliant);
  branches.insert(branches.end(), n_temporal, Branch::HappyDeviant);
  branches.insert(branches.end(), n_cancel, Branch::Cancel);
  branches.insert(branches.end(), n_late, Branch::LateCancel);

  Rng rng(spec.seed);
  rng.shuffle(branches);

  GeneratedLog out;
  out.schema.attributes = {{"amount", AttrType::Numerical}, {"priority", AttrType::Categorical}};
  out.log.attribute_schema = out.schema.attribute_map();
  out.constraint = TemporalConstraint{"o2c_ship_deadline", "confirm order", "ship goods",
                                      Pattern::MaxDistance, spec.bound_seconds};

  std::int64_t arrival = spec.start_epoch;
  for (std::size_t i = 0; i < spec.n_traces; ++i) {
    const Branch branch = branches[i];
    const bool deviant = branch == Branch::HappyDeviant || branch == Branch::LateCancel;
    const std::string case_id = make_case_id(i, spec.n_traces);

    arrival += std::max<std::int64_t>(1, std::llround(rng.exponential(spec.mean_interarrival_seconds)));

    // per-case attributes, emitted on the first event so every prefix sees them
    const double p_high = deviant ? 0.5 + spec.signal_strength / 2.0
                                  : 0.5 - spec.signal_strength / 2.0;
    const std::string priority = rng.bernoulli(p_high) ? "high" : "low";
    const double amount = std::round(rng.lognormal(std::log(100.0), 0.3) * 100.0) / 100.0;

    Trace trace;
    trace.case_id = case_id;
    // per-case attributes ride on the first event; later events carry the
    // explicit missing token, exactly as the parser represents an empty
    // field, so a write/parse round trip reproduces the log field by field
    auto push_event = [&trace, &case_id](const char* activity, std::int64_t ts) {
      Event ev;
      ev.activity = activity;
      ev.case_id = case_id;
      ev.timestamp = ts;
      if (!trace.events.empty()) ev.attributes["priority"] = kMissingToken;
      trace.events.push_back(std::move(ev));
    };

    push_event("receive PO", arrival);
    trace.events[0].attributes["priority"] = priority;
    trace.events[0].attributes["amount"] = amount;

    CaseTruth truth;
    truth.case_id = case_id;
    truth.branch = branch_name(branch);
    truth.label = deviant ? 1 : 0;

    if (branch == Branch::Cancel) {
      push_event("cancel", arrival + positive_seconds(rng, std::log(4.0 * 3600), 0.5));
    } else {
      const std::int64_t confirm = arrival + positive_seconds(rng, std::log(2.0 * 3600), 0.5);
      push_event("confirm order", confirm);
      if (branch == Branch::LateCancel) {
        const std::int64_t cancel = confirm + positive_seconds(rng, std::log(6.0 * 3600), 0.5);
        push_event("cancel", cancel);
        truth.magnitude_seconds = std::max<std::int64_t>(cancel - arrival, 1);
      } else {
        const std::int64_t gap = class_gap(rng, spec, branch == Branch::HappyDeviant);
        const std::int64_t ship = confirm + gap;
        push_event("ship goods", ship);
        push_event("send invoice", ship + positive_seconds(rng, std::log(2.0 * 3600), 0.4));
        push_event("receive payment",
                   trace.events.back().timestamp + positive_seconds(rng, std::log(30.0 * 3600), 0.5));
        truth.gap_seconds = gap;
        if (branch == Branch::HappyDeviant) {
          truth.magnitude_seconds = gap - spec.bound_seconds;
        }
      }
    }

    if (!is_valid_o2c_sequence(trace)) {
      throw GenerationError("internal error: generated trace violates the process model");
    }
    out.log.traces.push_back(std::move(trace));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

void write_ground_truth(const std::vector<CaseTruth>& truth, std::ostream& out) {
  out << "case_id,branch,label,gap_seconds,magnitude_seconds\n";
  for (const auto& t : truth) {
    out << t.case_id << "," << t.branch << "," << t.label << "," << t.gap_seconds << ","
        << t.magnitude_seconds << "\n";
  }
}

}  // namespace pcm
