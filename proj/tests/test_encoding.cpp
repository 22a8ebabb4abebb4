#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "pcm/encoding.hpp"
#include "pcm/errors.hpp"
#include "pcm/rng.hpp"
#include "pcm/timestamp.hpp"
#include "test_util.hpp"

using namespace pcm;
using test::make_event;
using test::make_trace;
using test::whole_trace_prefix;

namespace {

std::map<std::string, AttrType> simple_schema() {
  return {{"amount", AttrType::Numerical}, {"priority", AttrType::Categorical}};
}

double feature_of(const std::vector<double>& raw, const EncoderSpec& spec,
                  const std::string& name) {
  auto it = std::find(spec.feature_names.begin(), spec.feature_names.end(), name);
  REQUIRE(it != spec.feature_names.end());
  return raw[static_cast<std::size_t>(it - spec.feature_names.begin())];
}

}  // namespace

TEST_CASE("time features of a known instant") {
  const auto ts = parse_timestamp("2024-03-04T13:05:00Z", "%Y-%m-%dT%H:%M:%S%z");
  const Event ev = make_event("a", "c", ts);
  const TimeFeatures tf = extract_time_features(ev, ts, ts);
  CHECK(tf.month == 3);
  CHECK(tf.weekday == 0);  // Monday
  CHECK(tf.hour == 13);
  CHECK(tf.since_start_seconds == 0);
  CHECK(tf.since_prev_seconds == 0);
}

TEST_CASE("time features against an independent weekday oracle") {
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const int year = 1990 + static_cast<int>(rng.below(60));
    const int month = 1 + static_cast<int>(rng.below(12));
    const int day = 1 + static_cast<int>(rng.below(28));
    const std::int64_t ts = days_from_civil(year, month, day) * 86400 +
                            static_cast<std::int64_t>(rng.below(86400));
    const TimeFeatures tf = extract_time_features(make_event("a", "c", ts), ts, ts);
    CHECK(tf.weekday == test::zeller_monday0(year, month, day));
    CHECK(tf.month == month);
  }
}

TEST_CASE("elapsed features") {
  const Event second = make_event("b", "c", 1090);
  const TimeFeatures tf = extract_time_features(second, 1000, 1000);
  CHECK(tf.since_start_seconds == 90);
  CHECK(tf.since_prev_seconds == 90);
}

TEST_CASE("vocabulary layout: activities plus unseen slot") {
  const auto prefixes = std::vector<LabeledPrefix>{
      whole_trace_prefix(make_trace("c1", {{"A", 0}, {"B", 10}})),
      whole_trace_prefix(make_trace("c2", {{"A", 0}})),
  };
  const EncoderSpec spec = fit_encoder(prefixes, {});
  CHECK(spec.categorical_vocab.at("activity") == std::vector<std::string>{"A", "B"});

  std::size_t activity_columns = 0;
  for (const auto& name : spec.feature_names) {
    if (name.rfind("activity=", 0) == 0) ++activity_columns;
  }
  CHECK(activity_columns == 3);  // A, B and the unseen slot
}

TEST_CASE("numerical attribute contributes mean and std columns") {
  Trace t = make_trace("c1", {{"A", 0}});
  t.events[0].attributes["amount"] = 5.0;
  const EncoderSpec spec = fit_encoder({whole_trace_prefix(t)}, simple_schema());
  CHECK(std::count(spec.feature_names.begin(), spec.feature_names.end(), "amount:mean") == 1);
  CHECK(std::count(spec.feature_names.begin(), spec.feature_names.end(), "amount:std") == 1);
}

TEST_CASE("refit on identical input reproduces the document byte for byte") {
  Rng rng(3);
  std::vector<LabeledPrefix> prefixes;
  for (int i = 0; i < 20; ++i) {
    Trace t;
    t.case_id = "c" + std::to_string(i);
    std::int64_t ts = 1672531200 + static_cast<std::int64_t>(rng.below(86400));
    for (std::size_t e = 0; e < 1 + rng.below(4); ++e) {
      Event ev = make_event("act" + std::to_string(rng.below(3)), t.case_id, ts);
      ev.attributes["priority"] = rng.bernoulli(0.5) ? "high" : "low";
      if (rng.bernoulli(0.5)) ev.attributes["amount"] = rng.uniform(0, 100);
      t.events.push_back(std::move(ev));
      ts += 60;
    }
    prefixes.push_back(whole_trace_prefix(std::move(t)));
  }
  const auto a = fit_encoder(prefixes, simple_schema());
  const auto b = fit_encoder(prefixes, simple_schema());
  CHECK(encoder_to_json(a) == encoder_to_json(b));
  CHECK(encoder_digest(a) == encoder_digest(b));
}

TEST_CASE("raw frequencies count occurrences") {
  const auto fit_input = std::vector<LabeledPrefix>{
      whole_trace_prefix(make_trace("c1", {{"A", 0}, {"A", 10}, {"B", 20}}))};
  const EncoderSpec spec = fit_encoder(fit_input, {});
  const auto raw = encode_raw(fit_input[0], spec);
  CHECK(feature_of(raw, spec, "activity=A") == 2.0);
  CHECK(feature_of(raw, spec, "activity=B") == 1.0);
  CHECK(feature_of(raw, spec, "activity=" + kUnseenToken) == 0.0);
  CHECK(feature_of(raw, spec, "prefix_len") == 3.0);
}

TEST_CASE("population statistics for numerical attributes") {
  Trace t = make_trace("c1", {{"A", 0}, {"A", 10}});
  t.events[0].attributes["amount"] = 10.0;
  t.events[1].attributes["amount"] = 20.0;
  const auto prefix = whole_trace_prefix(std::move(t));
  const EncoderSpec spec = fit_encoder({prefix}, {{"amount", AttrType::Numerical}});
  const auto raw = encode_raw(prefix, spec);
  CHECK(feature_of(raw, spec, "amount:mean") == 15.0);
  CHECK(feature_of(raw, spec, "amount:std") == 5.0);  // population, not sample
}

TEST_CASE("single observation has zero std; absent attribute encodes to zeros") {
  Trace with_one = make_trace("c1", {{"A", 0}});
  with_one.events[0].attributes["amount"] = 7.0;
  const auto p1 = whole_trace_prefix(std::move(with_one));
  const EncoderSpec spec = fit_encoder({p1}, {{"amount", AttrType::Numerical}});

  const auto raw1 = encode_raw(p1, spec);
  CHECK(feature_of(raw1, spec, "amount:std") == 0.0);

  const auto p2 = whole_trace_prefix(make_trace("c2", {{"A", 0}}));
  const auto raw2 = encode_raw(p2, spec);
  CHECK(feature_of(raw2, spec, "amount:mean") == 0.0);
  CHECK(feature_of(raw2, spec, "amount:std") == 0.0);
}

TEST_CASE("unseen categorical values land in the unseen slot") {
  const auto train = std::vector<LabeledPrefix>{
      whole_trace_prefix(make_trace("c1", {{"A", 0}, {"B", 10}}))};
  const EncoderSpec spec = fit_encoder(train, {});
  const auto raw = encode_raw(whole_trace_prefix(make_trace("c9", {{"Z", 0}})), spec);
  CHECK(feature_of(raw, spec, "activity=" + kUnseenToken) == 1.0);
  CHECK(feature_of(raw, spec, "activity=A") == 0.0);
}

TEST_CASE("attribute outside the schema is rejected") {
  Trace t = make_trace("c1", {{"A", 0}});
  t.events[0].attributes["rogue"] = 1.0;
  const EncoderSpec spec = fit_encoder({whole_trace_prefix(make_trace("c0", {{"A", 0}}))}, {});
  CHECK_THROWS_AS(encode({whole_trace_prefix(t)}, spec), ContractViolation);
}

namespace {

std::vector<LabeledPrefix> random_prefixes(Rng& rng, std::size_t count) {
  std::vector<LabeledPrefix> out;
  for (std::size_t i = 0; i < count; ++i) {
    Trace t;
    t.case_id = "c" + std::to_string(i);
    std::int64_t ts = 1672531200 + static_cast<std::int64_t>(rng.below(86400 * 200));
    for (std::size_t e = 0; e < 1 + rng.below(6); ++e) {
      Event ev = make_event("act" + std::to_string(rng.below(4)), t.case_id, ts);
      ev.attributes["priority"] = rng.bernoulli(0.5) ? "high" : "low";
      if (rng.bernoulli(0.7)) ev.attributes["amount"] = rng.uniform(-5, 50);
      t.events.push_back(std::move(ev));
      ts += static_cast<std::int64_t>(rng.below(7200));
    }
    const int label = rng.bernoulli(0.4) ? 1 : 0;
    out.push_back(whole_trace_prefix(std::move(t), label, label ? 50000 : 0));
  }
  return out;
}

}  // namespace

TEST_CASE("training features are standardized after normalization") {
  Rng rng(41);
  const auto prefixes = random_prefixes(rng, 400);
  const EncoderSpec spec = fit_encoder(prefixes, simple_schema());
  const FeatureMatrix m = encode(prefixes, spec);

  for (std::size_t j = 0; j < m.cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) mean += m.row(i)[j];
    mean /= static_cast<double>(m.rows);
    double var = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
      var += (m.row(i)[j] - mean) * (m.row(i)[j] - mean);
    }
    var /= static_cast<double>(m.rows);
    if (spec.norm_std[j] == 0.0) {
      CHECK(mean == 0.0);  // constant columns collapse to zero
    } else {
      CHECK(std::abs(mean) < 1e-9);
      CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
    }
  }
  for (double v : m.values) CHECK(std::isfinite(v));
  CHECK(m.rows == prefixes.size());
}

TEST_CASE("magnitudes are converted to days") {
  auto p = whole_trace_prefix(make_trace("c1", {{"A", 0}}), 1, 104400);  // 29h
  const EncoderSpec spec = fit_encoder({p}, {});
  const FeatureMatrix m = encode({p}, spec);
  CHECK(m.magnitudes_days[0] == doctest::Approx(29.0 / 24.0).epsilon(1e-12));
}

TEST_CASE("aggregation is order-insensitive apart from elapsed features") {
  Rng rng(53);
  for (int iteration = 0; iteration < 30; ++iteration) {
    auto prefixes = random_prefixes(rng, 1);
    auto& prefix = prefixes[0];
    if (prefix.prefix.events.size() < 2) continue;

    const EncoderSpec spec = fit_encoder(prefixes, simple_schema());
    const auto raw = encode_raw(prefix, spec);

    LabeledPrefix shuffled = prefix;
    rng.shuffle(shuffled.prefix.events);
    const auto raw_shuffled = encode_raw(shuffled, spec);

    for (std::size_t j = 0; j < spec.feature_names.size(); ++j) {
      if (spec.feature_names[j].rfind("t:since", 0) == 0) continue;
      CHECK(raw[j] == raw_shuffled[j]);
    }
  }
}

TEST_CASE("encoding the test set leaves the spec untouched") {
  Rng rng(67);
  const auto train = random_prefixes(rng, 50);
  const auto test_set = random_prefixes(rng, 50);
  const EncoderSpec spec = fit_encoder(train, simple_schema());
  const std::string digest_before = encoder_digest(spec);
  (void)encode(test_set, spec);
  CHECK(encoder_digest(spec) == digest_before);
}

TEST_CASE("encoder document round trip") {
  Rng rng(71);
  const auto train = random_prefixes(rng, 30);
  const EncoderSpec spec = fit_encoder(train, simple_schema());

  const auto path = std::filesystem::path("/tmp/pcm_test_encoder.json");
  save_encoder(spec, path);
  const EncoderSpec loaded = load_encoder(path);
  CHECK(encoder_to_json(loaded) == encoder_to_json(spec));

  // identical encodings, bit for bit
  const FeatureMatrix a = encode(train, spec);
  const FeatureMatrix b = encode(train, loaded);
  CHECK(a.values == b.values);
}

TEST_CASE("encoder document version and truncation errors") {
  CHECK_THROWS_AS(encoder_from_json("{\"format\":\"pcm-encoder\",\"version\":99}"), ConfigError);
  CHECK_THROWS_AS(encoder_from_json("{\"format\":\"other\"}"), ConfigError);
  CHECK_THROWS_AS(encoder_from_json("{\"format\":\"pcm-encoder\",\"ver"), ParseError);
}

TEST_CASE("reserved attribute names are rejected") {
  const auto train = std::vector<LabeledPrefix>{whole_trace_prefix(make_trace("c", {{"A", 0}}))};
  CHECK_THROWS_AS(fit_encoder(train, {{"activity", AttrType::Categorical}}), ConfigError);
  CHECK_THROWS_AS(fit_encoder(train, {{"t:month", AttrType::Numerical}}), ConfigError);
  CHECK_THROWS_AS(fit_encoder(train, {{"prefix_len", AttrType::Numerical}}), ConfigError);
}

TEST_CASE("last-event time features behind the option") {
  Trace t = make_trace("c1", {{"A", 1672531200}, {"B", 1672531200 + 3600}});
  const auto prefix = whole_trace_prefix(std::move(t));
  EncodeOptions options;
  options.last_event_time_features = true;
  const EncoderSpec spec = fit_encoder({prefix}, {}, options);
  const auto raw = encode_raw(prefix, spec);
  CHECK(feature_of(raw, spec, "tlast:hour") == 1.0);  // 01:00 UTC
  const EncoderSpec plain = fit_encoder({prefix}, {});
  CHECK(plain.feature_count() + 3 == spec.feature_count());
}
