// Serial reference vs OpenMP path for the batch kernels.
// The second argument of every benchmark selects the path: 0 serial, 1 parallel.

#include <benchmark/benchmark.h>

#include <filesystem>
#include <string>
#include <vector>

#include "mia/corpus.hpp"
#include "mia/kernels.hpp"
#include "mia/names.hpp"
#include "mia/rng.hpp"
#include "mia/text.hpp"
#include "support/synth.hpp"

namespace {

using mia::kernels::Exec;

Exec exec_of(const benchmark::State& state) { return state.range(1) ? Exec::parallel : Exec::serial; }

std::vector<mia::kernels::TokenPair> token_pairs(std::size_t n) {
    mia::Rng rng(42);
    std::vector<mia::kernels::TokenPair> pairs;
    pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        pairs.push_back({mia::text::tokenize(synth::paragraph(rng, 300)), mia::text::tokenize(synth::paragraph(rng, 300))});
    return pairs;
}

void BM_BatchTokenLcs(benchmark::State& state) {
    auto pairs = token_pairs(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(mia::kernels::batch_token_lcs(pairs, exec_of(state)));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BatchTokenLcs)->ArgsProduct({{200, 2000}, {0, 1}})->UseRealTime();

void BM_ExtractAll(benchmark::State& state) {
    auto n = static_cast<std::size_t>(state.range(0));
    auto docs = synth::documents(n / 2, n / 2, 7);
    auto spec = synth::spec(n / 2);
    const auto& detector = mia::default_name_detector();
    for (auto _ : state) benchmark::DoNotOptimize(mia::kernels::extract_all(docs, spec, detector, exec_of(state)));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ExtractAll)->ArgsProduct({{100, 400}, {0, 1}})->UseRealTime();

void BM_IngestAll(benchmark::State& state) {
    auto n = static_cast<std::size_t>(state.range(0));
    auto root = synth::temp_dir("bench_ingest_" + std::to_string(n));
    synth::write_latex_corpus(root, synth::documents(n / 2, n / 2, 9));
    auto files = mia::list_corpus(root);
    for (auto _ : state)
        benchmark::DoNotOptimize(mia::kernels::ingest_all(files, mia::Source::arxiv, exec_of(state)));
    state.SetItemsProcessed(state.iterations() * state.range(0));
    std::filesystem::remove_all(root);
}
BENCHMARK(BM_IngestAll)->ArgsProduct({{100, 400}, {0, 1}})->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
