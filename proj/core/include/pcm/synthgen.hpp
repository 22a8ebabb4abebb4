#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "pcm/constraint.hpp"
#include "pcm/event_log.hpp"

namespace pcm {

// Order-to-cash style generator. Control flow has three shapes:
//   receive PO -> confirm order -> ship goods -> send invoice -> receive payment
//   receive PO -> cancel                         (constraint anchor absent)
//   receive PO -> confirm order -> cancel        (goods never shipped)
// The confirm->ship gap is drawn from class-conditional log-normal
// distributions so the deviant fraction lands on positive_ratio exactly
// (up to count rounding).
struct GenSpec {
  std::size_t n_traces = 998;
  double positive_ratio = 0.41;
  std::int64_t bound_seconds = 86400;  // 24h ship deadline after confirmation

  // log-normal parameters of the confirm->ship gap, per class
  double compliant_gap_log_mean = std::log(10.0 * 3600);  // median 10h
  double compliant_gap_log_sigma = 0.45;
  double deviant_gap_log_mean = std::log(44.0 * 3600);    // median 44h
  double deviant_gap_log_sigma = 0.25;

  double cancel_probability = 0.0;       // pre-confirmation cancel (compliant)
  double late_cancel_probability = 0.0;  // post-confirmation cancel (ship never occurs)

  // how strongly the per-case "priority" attribute predicts the outcome:
  // 0 = independent coin, 1 = deterministic separation
  double signal_strength = 0.0;

  std::uint64_t seed = 1;
  int retry_budget = 1000;
  double mean_interarrival_seconds = 1800.0;
  std::int64_t start_epoch = 1672617600;  // 2023-01-02T00:00:00Z
};

// the published 998-trace / 0.41-positive profile
GenSpec table1_o2c_preset();

struct CaseTruth {
  std::string case_id;
  std::string branch;  // happy | cancel | late_cancel
  int label = 0;
  std::int64_t gap_seconds = -1;  // confirm->ship, -1 when goods never ship
  std::int64_t magnitude_seconds = 0;
};

struct GeneratedLog {
  EventLog log;
  LogSchema schema;
  TemporalConstraint constraint;
  std::vector<CaseTruth> truth;
};

GeneratedLog generate(const GenSpec& spec);

// control-flow checker used by tests and the generator's own self-check
bool is_valid_o2c_sequence(const Trace& trace);

void write_ground_truth(const std::vector<CaseTruth>& truth, std::ostream& out);

}  // namespace pcm
