#include <benchmark/benchmark.h>

#include <vector>

#include "armtest/analysis.hpp"
#include "armtest/config.hpp"
#include "armtest/parallel.hpp"
#include "armtest/perception.hpp"
#include "armtest/search.hpp"

using namespace armtest;

namespace {

const Config& uc1() {
  static const Config c = profile_config(kProfileUc1);
  return c;
}

std::vector<Chromosome> population(int n) {
  Rng rng(5);
  std::vector<Chromosome> pop;
  for (int i = 0; i < n; ++i) pop.push_back(sample_random(uc1().ranges, uc1().workspace, rng));
  return pop;
}

template <bool Parallel>
void BM_Sparseness(benchmark::State& state) {
  const auto pop = population(static_cast<int>(state.range(0)));
  std::vector<std::vector<double>> feats;
  for (const Chromosome& c : pop) feats.push_back(unit_genes(c, uc1().ranges));
  auto dist = [&](std::size_t i, std::size_t j) { return feature_distance(feats[i], feats[j]); };
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? sparseness(pop.size(), dist) : sparseness_serial(pop.size(), dist));
  }
}

template <bool Parallel>
void BM_EvaluatePopulation(benchmark::State& state) {
  const auto pop = population(static_cast<int>(state.range(0)));
  std::vector<std::uint64_t> seeds(pop.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = episode_seed(3, i);
  SyntheticPerception model(uc1().perception);
  const EvaluationContext ctx{uc1().ranges, uc1().workspace, model, uc1().thresholds, uc1().search};
  for (auto _ : state) {
    auto out = Parallel ? evaluate_population(pop, seeds, ctx) : evaluate_population_serial(pop, seeds, ctx);
    benchmark::DoNotOptimize(out.data());
  }
}

// eval_offline has no separate serial body; one worker is its reference.
void BM_EvalOffline(benchmark::State& state) {
  const auto data = generate_dataset(uc1().dataset.ranges, uc1().workspace, 240, 7);
  std::vector<std::vector<Detection>> preds;
  std::vector<std::vector<Annotation>> gts;
  for (const DatasetSample& s : data) {
    preds.push_back(predict(uc1().perception, s.scene, static_cast<std::uint64_t>(s.id)));
    gts.push_back(s.annotations);
  }
  const int before = worker_count();
  set_worker_count(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(eval_offline(preds, gts).map_50_95);
  set_worker_count(before);
}

}  // namespace

BENCHMARK(BM_Sparseness<false>)->Arg(200)->Arg(1000);
BENCHMARK(BM_Sparseness<true>)->Arg(200)->Arg(1000);
BENCHMARK(BM_EvaluatePopulation<false>)->Arg(40)->Arg(400);
BENCHMARK(BM_EvaluatePopulation<true>)->Arg(40)->Arg(400);
BENCHMARK(BM_EvalOffline)->Arg(1)->Arg(4);

BENCHMARK_MAIN();
