#include <benchmark/benchmark.h>

#include <vector>

#include "abmscope/abm.hpp"
#include "abmscope/descriptors.hpp"
#include "abmscope/diffusion.hpp"
#include "abmscope/emachine.hpp"
#include "abmscope/mixture.hpp"
#include "abmscope/rng.hpp"
#include "abmscope/symbolize.hpp"

using namespace abmscope;

namespace {

Eigen::MatrixXd normal_rows(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double shift = 0.0) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = shift + rng.normal();
    return x;
}

symbolic::SymbolSequence golden_mean(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> s(n);
    std::uint8_t prev = 0;
    for (auto& x : s) {
        x = prev == 1 ? 0 : static_cast<std::uint8_t>(rng.below(2));
        prev = x;
    }
    return symbolic::from_symbols(std::move(s), 2);
}

} // namespace

static void BM_Simulate(benchmark::State& state) {
    sim::SimConfig c;
    c.n_elders = static_cast<std::size_t>(state.range(0));
    c.horizon = 400;
    for (auto _ : state) benchmark::DoNotOptimize(sim::simulate(c));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 400);
}
BENCHMARK(BM_Simulate)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_Reconstruct(benchmark::State& state) {
    const auto seq = golden_mean(static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(emachine::reconstruct(seq, 3, 0.01));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Reconstruct)->Arg(20000)->Arg(200000)->Unit(benchmark::kMillisecond);

static void BM_Analyze(benchmark::State& state) {
    const auto seq = golden_mean(20000, 2);
    for (auto _ : state) benchmark::DoNotOptimize(emachine::analyze(seq));
}
BENCHMARK(BM_Analyze)->Unit(benchmark::kMillisecond);

static void BM_TrainEpochs(benchmark::State& state) {
    const auto data = normal_rows(2000, 2, 3);
    diffusion::TrainConfig cfg;
    cfg.epochs = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(diffusion::train(data, cfg, diffusion::NoiseSchedule::linear()));
}
BENCHMARK(BM_TrainEpochs)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_Sample(benchmark::State& state) {
    diffusion::TrainConfig cfg;
    cfg.epochs = 1;
    const auto model = diffusion::train(normal_rows(500, 2, 4), cfg, diffusion::NoiseSchedule::linear());
    for (auto _ : state) benchmark::DoNotOptimize(diffusion::sample(model, static_cast<std::size_t>(state.range(0)), 5));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sample)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_KnnKl(benchmark::State& state) {
    const auto a = normal_rows(state.range(0), 3, 6);
    const auto b = normal_rows(state.range(0), 3, 7, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(descriptors::divergence(a, b, descriptors::Metric::kl_knn));
}
BENCHMARK(BM_KnnKl)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

static void BM_SlicedW1(benchmark::State& state) {
    const auto a = normal_rows(state.range(0), 3, 8);
    const auto b = normal_rows(state.range(0), 3, 9, 0.5);
    for (auto _ : state)
        benchmark::DoNotOptimize(descriptors::divergence(a, b, descriptors::Metric::wasserstein1_sliced));
}
BENCHMARK(BM_SlicedW1)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_CountModes(benchmark::State& state) {
    Eigen::MatrixXd x = normal_rows(1000, 3, 10);
    for (Eigen::Index i = 0; i < x.rows(); i += 2) x.row(i).array() += 3.0;
    for (auto _ : state) benchmark::DoNotOptimize(descriptors::count_modes(x, 4));
}
BENCHMARK(BM_CountModes)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
