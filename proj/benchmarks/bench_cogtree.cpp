#include <benchmark/benchmark.h>

#include <memory>

#include "cogtree/builder.hpp"
#include "cogtree/data.hpp"
#include "cogtree/losses.hpp"
#include "cogtree/model.hpp"

using namespace cogtree;

namespace {

SynthSpec spec_for(std::size_t concepts) {
  SynthSpec s;
  s.num_concepts = concepts;
  s.head_count = 200;
  s.tail_count = 10;
  s.seed = 3;
  return s;
}

// Log where each fine class is mostly confused with its head.
PredictionLog planted_log(const SyntheticData& data) {
  PredictionLog log;
  for (ClassIndex c = 0; c < data.space.size(); ++c) {
    for (int r = 0; r < 4; ++r) log.rows.push_back({c, data.planted_concept[c]});
    log.rows.push_back({c, c});
  }
  return log;
}

}  // namespace

static void BM_BuildTree(benchmark::State& state) {
  const SyntheticData data = generate_synthetic(spec_for(state.range(0)));
  const PredictionLog log = planted_log(data);
  for (auto _ : state) {
    TreeBuild b = build_cogtree(log, data.space, TreeVariant::standard);
    benchmark::DoNotOptimize(b.tree.size());
  }
  state.counters["classes"] = static_cast<double>(data.space.size());
}
BENCHMARK(BM_BuildTree)->Arg(6)->Arg(24)->Arg(96);

static void BM_LossCogTree(benchmark::State& state) {
  const SyntheticData data = generate_synthetic(spec_for(state.range(0)));
  LossSpec spec;
  spec.tree = std::make_shared<const CogTree>(
      build_cogtree(planted_log(data), data.space, TreeVariant::standard).tree);
  const Loss loss(spec, data.space.counts());
  Rng rng(1);
  std::vector<double> scores(data.space.size());
  for (double& s : scores) s = rng.normal();
  ClassIndex target = 0;
  for (auto _ : state) {
    LossResult r = loss(scores, target);
    benchmark::DoNotOptimize(r.loss);
    target = (target + 1) % scores.size();
  }
}
BENCHMARK(BM_LossCogTree)->Arg(6)->Arg(24)->Arg(96);

static void BM_LossCE(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
  for (double& s : scores) s = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(loss_ce(scores, 0).loss);
}
BENCHMARK(BM_LossCE)->Arg(30)->Arg(120)->Arg(480);

static void BM_TrainEpoch(benchmark::State& state) {
  const SyntheticData data = generate_synthetic(spec_for(6));
  TrainConfig config;
  config.epochs = 1;
  config.loss.kind = state.range(0) ? LossKind::cogtree : LossKind::ce;
  if (state.range(0)) {
    config.loss.tree = std::make_shared<const CogTree>(
        build_cogtree(planted_log(data), data.space, TreeVariant::standard).tree);
  }
  Classifier model = Classifier::linear(data.train.dim(), data.space.size());
  Rng rng(2);
  model.initialize(rng);
  for (auto _ : state) {
    TrainResult r = train(model, data.train, data.space, config);
    benchmark::DoNotOptimize(r.history.epoch_loss.back());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * data.train.size()));
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
