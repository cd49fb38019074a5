#include <benchmark/benchmark.h>

#include <set>

#include "memgauge/refmodel.hpp"
#include "support/synthetic.hpp"

using namespace memgauge;

namespace {

void BM_TrainEpoch(benchmark::State& state) {
    const Corpus corpus = testing::synthetic_method_name_corpus({.per_label = 20, .seed = 9}, "b");
    const Vocab vocab = build_vocab(corpus, 1);
    const std::vector<std::string> classes(corpus.label_pool.begin(), corpus.label_pool.end());
    const std::size_t dim = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        RefModel model = init_model(Task::MethodName, vocab, classes, dim, 3);
        model = train(std::move(model), corpus, corpus, {1, 32, 0.5, 3}, {"b", 0.0, "x"}, nullptr);
        benchmark::DoNotOptimize(model.embedding.data());
    }
}

void BM_Predict(benchmark::State& state) {
    const Corpus corpus = testing::synthetic_method_name_corpus({.per_label = 20, .seed = 9}, "b");
    const Vocab vocab = build_vocab(corpus, 1);
    const std::vector<std::string> classes(corpus.label_pool.begin(), corpus.label_pool.end());
    const RefModel model = init_model(Task::MethodName, vocab, classes, 128, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(predict(model, corpus.samples[0].tokens).score);
    }
}

} // namespace

BENCHMARK(BM_TrainEpoch)->Arg(8)->Arg(128);
BENCHMARK(BM_Predict);
