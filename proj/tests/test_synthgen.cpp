#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "pcm/errors.hpp"
#include "pcm/labeling.hpp"
#include "pcm/synthgen.hpp"
#include "test_util.hpp"

using namespace pcm;

namespace {

double deviant_fraction(const GeneratedLog& gen) {
  std::size_t positives = 0;
  for (const auto& t : gen.truth) positives += t.label;
  return static_cast<double>(positives) / static_cast<double>(gen.truth.size());
}

}  // namespace

TEST_CASE("same spec and seed reproduce the log byte for byte") {
  GenSpec spec = table1_o2c_preset();
  spec.n_traces = 120;
  spec.seed = 99;
  const GeneratedLog a = generate(spec);
  const GeneratedLog b = generate(spec);
  CHECK(a.log == b.log);

  std::ostringstream sa, sb;
  write_log(a.log, a.schema, sa);
  write_log(b.log, b.schema, sb);
  CHECK(sa.str() == sb.str());

  std::ostringstream ta, tb;
  write_ground_truth(a.truth, ta);
  write_ground_truth(b.truth, tb);
  CHECK(ta.str() == tb.str());

  spec.seed = 100;
  std::ostringstream sc;
  const GeneratedLog c = generate(spec);
  write_log(c.log, c.schema, sc);
  CHECK(sa.str() != sc.str());
}

TEST_CASE("every trace follows the process model") {
  GenSpec spec = table1_o2c_preset();
  spec.n_traces = 200;
  spec.cancel_probability = 0.15;
  spec.late_cancel_probability = 0.05;
  spec.seed = 3;
  const GeneratedLog gen = generate(spec);
  REQUIRE(gen.log.traces.size() == 200);
  for (const auto& trace : gen.log.traces) {
    CHECK(is_valid_o2c_sequence(trace));
    for (std::size_t e = 1; e < trace.events.size(); ++e) {
      CHECK(trace.events[e].timestamp >= trace.events[e - 1].timestamp);
    }
  }
}

TEST_CASE("the preset hits the published profile") {
  GenSpec spec = table1_o2c_preset();
  spec.seed = 7;
  const GeneratedLog gen = generate(spec);
  CHECK(gen.log.traces.size() == 998);
  const double fraction = deviant_fraction(gen);
  CHECK(fraction >= 0.38);
  CHECK(fraction <= 0.44);

  // at most six activity classes
  std::set<std::string> activities;
  for (const auto& trace : gen.log.traces) {
    for (const auto& ev : trace.events) activities.insert(ev.activity);
  }
  CHECK(activities.size() <= 6);

  // cut lengths stay within the published 1..3 window
  const auto cases = label_log(gen.log, gen.constraint);
  for (const auto& c : cases) {
    CHECK(c.cut_trace.events.size() >= 1);
    CHECK(c.cut_trace.events.size() <= 3);
  }
}

TEST_CASE("ground truth agrees with the constraint module") {
  GenSpec spec = table1_o2c_preset();
  spec.n_traces = 150;
  spec.cancel_probability = 0.1;
  spec.late_cancel_probability = 0.1;
  spec.seed = 21;
  const GeneratedLog gen = generate(spec);
  const auto cases = label_log(gen.log, gen.constraint);
  REQUIRE(cases.size() == gen.truth.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    CHECK(cases[i].case_id == gen.truth[i].case_id);
    CHECK(cases[i].label == gen.truth[i].label);
    CHECK(cases[i].magnitude_seconds == gen.truth[i].magnitude_seconds);
    if (gen.truth[i].branch == "happy" && gen.truth[i].label == 1) {
      CHECK(cases[i].kind == ViolationKind::Temporal);
      CHECK(cases[i].magnitude_seconds == gen.truth[i].gap_seconds - spec.bound_seconds);
    }
    if (gen.truth[i].branch == "late_cancel") {
      CHECK(cases[i].kind == ViolationKind::ControlFlow);
    }
  }
}

TEST_CASE("gaps land on the requested side of the bound") {
  GenSpec spec = table1_o2c_preset();
  spec.n_traces = 300;
  spec.seed = 5;
  const GeneratedLog gen = generate(spec);
  for (const auto& t : gen.truth) {
    if (t.gap_seconds < 0) continue;
    if (t.label == 1) {
      CHECK(t.gap_seconds > spec.bound_seconds);
    } else {
      CHECK(t.gap_seconds <= spec.bound_seconds);
    }
  }
}

TEST_CASE("full signal separates the classes deterministically") {
  GenSpec spec = table1_o2c_preset();
  spec.n_traces = 200;
  spec.signal_strength = 1.0;
  spec.seed = 13;
  const GeneratedLog gen = generate(spec);
  for (std::size_t i = 0; i < gen.log.traces.size(); ++i) {
    const auto& priority =
        std::get<std::string>(gen.log.traces[i].events[0].attributes.at("priority"));
    CHECK(priority == (gen.truth[i].label == 1 ? "high" : "low"));
  }
}

TEST_CASE("zero signal leaves both priorities in both classes") {
  GenSpec spec = table1_o2c_preset();
  spec.n_traces = 400;
  spec.signal_strength = 0.0;
  spec.seed = 17;
  const GeneratedLog gen = generate(spec);
  int high_pos = 0, low_pos = 0, high_neg = 0, low_neg = 0;
  for (std::size_t i = 0; i < gen.log.traces.size(); ++i) {
    const bool high =
        std::get<std::string>(gen.log.traces[i].events[0].attributes.at("priority")) == "high";
    if (gen.truth[i].label == 1) (high ? high_pos : low_pos)++;
    else (high ? high_neg : low_neg)++;
  }
  CHECK(high_pos > 0);
  CHECK(low_pos > 0);
  CHECK(high_neg > 0);
  CHECK(low_neg > 0);
}

TEST_CASE("branch mix follows the requested probabilities") {
  GenSpec spec = table1_o2c_preset();
  spec.n_traces = 1000;
  spec.cancel_probability = 0.2;
  spec.late_cancel_probability = 0.05;
  spec.seed = 29;
  const GeneratedLog gen = generate(spec);
  std::size_t cancels = 0, late = 0;
  for (const auto& t : gen.truth) {
    cancels += t.branch == "cancel";
    late += t.branch == "late_cancel";
  }
  CHECK(cancels == 200);
  CHECK(late == 50);
  CHECK(std::abs(deviant_fraction(gen) - spec.positive_ratio) <= 0.03);
}

TEST_CASE("unsatisfiable specs fail with a generation error") {
  GenSpec impossible = table1_o2c_preset();
  impossible.n_traces = 10;
  impossible.bound_seconds = 1;  // compliant gaps of at most one second never materialize
  CHECK_THROWS_AS(generate(impossible), GenerationError);

  GenSpec overfull = table1_o2c_preset();
  overfull.n_traces = 10;
  overfull.positive_ratio = 0.5;
  overfull.cancel_probability = 0.8;
  CHECK_THROWS_AS(generate(overfull), GenerationError);

  GenSpec inconsistent = table1_o2c_preset();
  inconsistent.n_traces = 10;
  inconsistent.positive_ratio = 0.1;
  inconsistent.late_cancel_probability = 0.5;
  CHECK_THROWS_AS(generate(inconsistent), GenerationError);
}

TEST_CASE("generated logs survive a write/parse round trip field by field") {
  GenSpec spec = table1_o2c_preset();
  spec.n_traces = 60;
  spec.cancel_probability = 0.1;
  spec.seed = 41;
  const GeneratedLog gen = generate(spec);
  std::ostringstream out;
  write_log(gen.log, gen.schema, out);
  std::istringstream in(out.str());
  CHECK(parse_log(in, gen.schema) == gen.log);
}

TEST_CASE("the sidecar format lists one row per case") {
  GenSpec spec = table1_o2c_preset();
  spec.n_traces = 25;
  const GeneratedLog gen = generate(spec);
  std::ostringstream out;
  write_ground_truth(gen.truth, out);
  int lines = 0;
  for (char c : out.str()) lines += (c == '\n');
  CHECK(lines == 26);
}
