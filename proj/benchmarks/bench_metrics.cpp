#include <benchmark/benchmark.h>

#include "memgauge/metrics.hpp"
#include "memgauge/rng.hpp"

using namespace memgauge;

namespace {

std::vector<double> random_losses(std::size_t n) {
    Rng rng(17);
    std::vector<double> losses(n);
    for (double& x : losses) x = rng.uniform(0.0, 8.0);
    return losses;
}

void BM_GiniFast(benchmark::State& state) {
    const auto losses = random_losses(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(gini(losses));
    }
}

void BM_GiniBruteForce(benchmark::State& state) {
    const auto losses = random_losses(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        double pair_sum = 0.0, total = 0.0;
        for (double a : losses) total += a;
        for (double a : losses) {
            for (double b : losses) pair_sum += std::abs(a - b);
        }
        benchmark::DoNotOptimize(pair_sum / (2.0 * losses.size() * total));
    }
}

void BM_SmoothedBleu4(benchmark::State& state) {
    Rng rng(3);
    std::vector<std::string> candidate, reference;
    for (int i = 0; i < state.range(0); ++i) {
        candidate.push_back("w" + std::to_string(rng.below(40)));
        reference.push_back("w" + std::to_string(rng.below(40)));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(smoothed_bleu4(candidate, reference).score);
    }
}

void BM_SubtokenF1(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(subtoken_f1("computeSortedPrefixSums", "computePrefixSums").f1);
    }
}

} // namespace

BENCHMARK(BM_GiniFast)->Arg(100)->Arg(1000)->Arg(10000);
BENCHMARK(BM_GiniBruteForce)->Arg(100)->Arg(1000);
BENCHMARK(BM_SmoothedBleu4)->Arg(16)->Arg(64);
BENCHMARK(BM_SubtokenF1);

BENCHMARK_MAIN();
