#include <benchmark/benchmark.h>

#include "cfptas/cluster.hpp"
#include "cfptas/exact.hpp"
#include "cfptas/expansion.hpp"

using namespace cfptas;

namespace {

LatticeRegion square(std::int64_t side) { return LatticeRegion::box(std::vector<std::int64_t>{side, side}); }

void BM_EnumerateContours(benchmark::State& state) {
    const SpaceTimeRegion st(square(3), 2);
    const auto max_size = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(enumerate_contours(st, max_size, 2));
}
BENCHMARK(BM_EnumerateContours)->DenseRange(4, 7)->Unit(benchmark::kMillisecond);

// Fresh engine each round so nothing comes from the memo.
void BM_ContourWeights(benchmark::State& state) {
    const auto m = ising_model(2, {1e-3, 0.0});
    const SpaceTimeRegion st(square(3), 2);
    const auto contours = enumerate_contours(st, static_cast<std::size_t>(state.range(0)), 2);
    for (auto _ : state) {
        WeightEngine engine(m, st, 3.0);
        for (const auto& c : contours) benchmark::DoNotOptimize(engine.weight(c));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(contours.size()) * state.iterations());
}
BENCHMARK(BM_ContourWeights)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_Ursell(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    SmallGraph g(n);
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            if ((a + b) % 3 != 0) g.add_edge(a, b);
        }
    }
    for (auto _ : state) benchmark::DoNotOptimize(ursell(g));
}
BENCHMARK(BM_Ursell)->DenseRange(4, 10, 2);

void BM_EnumerateClusters(benchmark::State& state) {
    const SpaceTimeRegion st(square(3), 1);
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto contours = enumerate_contours(st, n - 1, 2);
    const auto incompatible = incompatibility_lists(st, contours);
    for (auto _ : state) benchmark::DoNotOptimize(enumerate_clusters(contours, incompatible, n));
}
BENCHMARK(BM_EnumerateClusters)->DenseRange(4, 6)->Unit(benchmark::kMillisecond);

void BM_ExactLogPartition(benchmark::State& state) {
    const auto m = ising_model(2, {0.05, 0.0});
    const auto region = LatticeRegion::box(std::vector<std::int64_t>{2, state.range(0)});
    for (auto _ : state) benchmark::DoNotOptimize(exact_log_partition(m, region, 0, 2.0));
}
BENCHMARK(BM_ExactLogPartition)->DenseRange(2, 4)->Unit(benchmark::kMillisecond);

void BM_Estimate(benchmark::State& state) {
    const auto m = ising_model(2, {1e-3, 0.0});
    ExpansionOptions o;
    o.epsilon = 0.1;
    for (auto _ : state) benchmark::DoNotOptimize(fptas_log_partition(m, square(3), 0, 5.0, o));
}
BENCHMARK(BM_Estimate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
