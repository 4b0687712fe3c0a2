#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

#include "topkcal/calibrate.hpp"
#include "topkcal/exact_sum.hpp"
#include "topkcal/ingest.hpp"
#include "topkcal/metrics.hpp"
#include "topkcal/pipeline.hpp"
#include "topkcal/synth.hpp"

using namespace topkcal;

namespace {

struct Data {
  std::vector<TopKPredictions> preds;
  std::vector<GroundTruth> truth;
};

Data make_data(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    TopKPredictions row{i, {}};
    GroundTruth gt{i, {}};
    double p = u(rng);
    for (LabelId r = 0; r < 5; ++r) {
      row.entries.push_back({r, p});
      if (u(rng) < p) gt.relevant.push_back(r);
      p *= u(rng);
    }
    d.preds.push_back(std::move(row));
    d.truth.push_back(std::move(gt));
  }
  return d;
}

void BM_ExactSumAdd(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(4096);
  for (auto& x : v) x = u(rng);
  for (auto _ : state) {
    ExactSum s;
    for (double x : v) s.add(x);
    benchmark::DoNotOptimize(s.value());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(v.size()));
}
BENCHMARK(BM_ExactSumAdd);

void BM_AccumulateMetrics(benchmark::State& state) {
  const auto data = make_data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    MetricAccumulator acc({1, 3, 5}, 10, false);
    for (std::size_t i = 0; i < data.preds.size(); ++i) acc.add(data.preds[i], data.truth[i]);
    benchmark::DoNotOptimize(acc.finish());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 5);
}
BENCHMARK(BM_AccumulateMetrics)->Arg(100000);

void BM_EvaluateReport(benchmark::State& state) {
  const auto data = make_data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_report(data.preds, data.truth, {1, 3, 5}));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 5);
}
BENCHMARK(BM_EvaluateReport)->Arg(100000);

void BM_FitIsotonic(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScoreOutcome> pairs(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pairs) {
    p.score = u(rng);
    p.outcome = u(rng) < p.score ? 1.0 : 0.0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_isotonic(pairs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitIsotonic)->Arg(10000)->Arg(500000);

void BM_FitPlatt(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScoreOutcome> pairs(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pairs) {
    p.score = u(rng) * 4.0 - 2.0;
    p.outcome = u(rng) < apply_platt({-1.5, 0.2}, p.score) ? 1.0 : 0.0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_platt(pairs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitPlatt)->Arg(500000);

void BM_ParseDump(benchmark::State& state) {
  const auto data = make_data(static_cast<std::size_t>(state.range(0)));
  std::ostringstream out;
  write_prediction_dump(out, data.preds);
  const std::string text = out.str();
  for (auto _ : state) {
    std::istringstream in(text);
    PredictionReader reader(in);
    TopKPredictions row;
    std::size_t rows = 0;
    while (reader.next(row)) ++rows;
    benchmark::DoNotOptimize(rows);
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseDump)->Arg(100000);

void BM_KFoldIsotonic(benchmark::State& state) {
  const auto world = generate_world({static_cast<std::size_t>(state.range(0)), 1000, 5, 1.1, 7});
  const auto dump = distort(world, Distortion::temperature(0.5));
  for (auto _ : state) benchmark::DoNotOptimize(kfold_recalibrate(dump, world.truth, {}));
}
BENCHMARK(BM_KFoldIsotonic)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
