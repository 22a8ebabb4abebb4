#include <benchmark/benchmark.h>

#include <numeric>
#include <sstream>
#include <vector>

#include "pcm/encoding.hpp"
#include "pcm/eval.hpp"
#include "pcm/harness.hpp"
#include "pcm/labeling.hpp"
#include "pcm/model.hpp"
#include "pcm/rng.hpp"
#include "pcm/synthgen.hpp"

namespace {

pcm::GeneratedLog make_log(std::size_t traces) {
  pcm::GenSpec spec = pcm::table1_o2c_preset();
  spec.n_traces = traces;
  spec.signal_strength = 0.5;
  spec.seed = 1;
  return pcm::generate(spec);
}

void BM_generate(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(make_log(static_cast<std::size_t>(state.range(0))));
  }
}
BENCHMARK(BM_generate)->Arg(1000);

void BM_parse_log(benchmark::State& state) {
  const pcm::GeneratedLog gen = make_log(static_cast<std::size_t>(state.range(0)));
  std::ostringstream out;
  pcm::write_log(gen.log, gen.schema, out);
  const std::string text = out.str();
  for (auto _ : state) {
    std::istringstream in(text);
    benchmark::DoNotOptimize(pcm::parse_log(in, gen.schema));
  }
}
BENCHMARK(BM_parse_log)->Arg(1000);

void BM_label_and_cut(benchmark::State& state) {
  const pcm::GeneratedLog gen = make_log(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pcm::label_log(gen.log, gen.constraint));
  }
}
BENCHMARK(BM_label_and_cut)->Arg(1000);

void BM_encode(benchmark::State& state) {
  const pcm::GeneratedLog gen = make_log(static_cast<std::size_t>(state.range(0)));
  const auto cases = pcm::label_log(gen.log, gen.constraint);
  const auto prefixes = pcm::generate_prefixes(cases, pcm::max_prefix_length(cases));
  const pcm::EncoderSpec spec = pcm::fit_encoder(prefixes, gen.schema.attribute_map());
  for (auto _ : state) {
    benchmark::DoNotOptimize(pcm::encode(prefixes, spec));
  }
}
BENCHMARK(BM_encode)->Arg(1000);

void BM_train_epoch(benchmark::State& state) {
  const pcm::GeneratedLog gen = make_log(1000);
  const auto cases = pcm::label_log(gen.log, gen.constraint);
  const auto prefixes = pcm::generate_prefixes(cases, pcm::max_prefix_length(cases));
  const pcm::EncoderSpec spec = pcm::fit_encoder(prefixes, gen.schema.attribute_map());
  const pcm::FeatureMatrix matrix = pcm::encode(prefixes, spec);

  pcm::TrainConfig cfg;
  cfg.hidden_sizes = {32, 32};
  cfg.epochs = 1;
  for (auto _ : state) {
    pcm::Trainer trainer(pcm::make_model(pcm::Mode::Mtl, matrix.cols, cfg), cfg);
    benchmark::DoNotOptimize(trainer.fit(matrix));
  }
}
BENCHMARK(BM_train_epoch);

void BM_auc(benchmark::State& state) {
  pcm::Rng rng(5);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<int> labels(n);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = rng.bernoulli(0.4) ? 1 : 0;
    scores[i] = rng.normal();
  }
  labels[0] = 1;
  labels[n - 1] = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pcm::auc(labels, scores));
  }
}
BENCHMARK(BM_auc)->Arg(100000);

void BM_forward(benchmark::State& state) {
  pcm::TrainConfig cfg;
  cfg.hidden_sizes = {32, 32};
  const pcm::MtlModel model = pcm::make_model(pcm::Mode::Mtl, 24, cfg);
  pcm::Rng rng(9);
  std::vector<double> x(24);
  for (auto& v : x) v = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(pcm::forward(model, x));
  }
}
BENCHMARK(BM_forward);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  return 0;
}
