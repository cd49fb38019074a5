#include <benchmark/benchmark.h>

#include "memgauge/noising.hpp"
#include "support/synthetic.hpp"

using namespace memgauge;

namespace {

void BM_PlanNoise(benchmark::State& state) {
    const Corpus corpus = testing::synthetic_method_name_corpus(
        {.per_label = static_cast<std::size_t>(state.range(0)), .seed = 5}, "bench");
    for (auto _ : state) {
        benchmark::DoNotOptimize(plan_noise(corpus, 0.5, NoiseMode::LabelSwap, 7));
    }
}

void BM_ApplyLabelSwap(benchmark::State& state) {
    const Corpus corpus = testing::synthetic_method_name_corpus(
        {.per_label = static_cast<std::size_t>(state.range(0)), .seed = 5}, "bench");
    const NoisePlan plan = plan_noise(corpus, 0.5, NoiseMode::LabelSwap, 7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(apply(corpus, plan));
    }
}

void BM_ApplyStmtDelete(benchmark::State& state) {
    const Corpus corpus = testing::synthetic_method_name_corpus(
        {.per_label = static_cast<std::size_t>(state.range(0)), .seed = 5}, "bench");
    const NoisePlan plan = plan_noise(corpus, 0.5, NoiseMode::StmtDelete, 7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(apply(corpus, plan));
    }
}

} // namespace

BENCHMARK(BM_PlanNoise)->Arg(20)->Arg(100);
BENCHMARK(BM_ApplyLabelSwap)->Arg(20)->Arg(100);
BENCHMARK(BM_ApplyStmtDelete)->Arg(20)->Arg(100);
