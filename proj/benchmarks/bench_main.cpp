#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "tsvlm/downsample.hpp"
#include "tsvlm/prompt.hpp"
#include "tsvlm/render.hpp"
#include "tsvlm/stats.hpp"

using namespace tsvlm;

namespace {

std::vector<double> signal(std::size_t n) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<double> x(n);
    for (std::size_t t = 0; t < n; ++t) {
        x[t] = std::sin(static_cast<double>(t) / 25.0) + (t > n / 2 && t < n / 2 + 100 ? 3.0 * noise(rng) * 10 : noise(rng));
    }
    return x;
}

void BM_UniformDownsample(benchmark::State& state) {
    const auto x = signal(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(uniform_downsample(x, 8));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_UniformDownsample)->Range(1 << 10, 1 << 16);

void BM_AdaptiveDownsample(benchmark::State& state) {
    const auto x = signal(static_cast<std::size_t>(state.range(0)));
    const DownsampleConfig cfg{Strategy::Adaptive, 8, 10, 0.0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(adaptive_downsample(x, cfg));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AdaptiveDownsample)->Range(1 << 10, 1 << 16);

void BM_SummaryStats(benchmark::State& state) {
    const auto x = signal(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(summary_stats(x));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SummaryStats)->Range(1 << 10, 1 << 16);

void BM_FitToBudget(benchmark::State& state) {
    const auto x = signal(static_cast<std::size_t>(state.range(0)));
    auto est = [](std::span<const double> v) { return estimate_tokens(render_values(v)); };
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_to_budget(x, 50, 2048, Strategy::Adaptive, 10, 0.0, est));
    }
}
BENCHMARK(BM_FitToBudget)->Range(1 << 10, 1 << 15);

void BM_RenderPlot(benchmark::State& state) {
    const TimeSeries s{"bench", {signal(static_cast<std::size_t>(state.range(0)))}, "x"};
    RenderConfig cfg;
    cfg.plot_type = state.range(1) == 0 ? PlotType::Line : PlotType::Scatter;
    for (auto _ : state) {
        benchmark::DoNotOptimize(render_plot(s, cfg));
    }
}
BENCHMARK(BM_RenderPlot)->Args({512, 0})->Args({512, 1})->Args({4096, 0});

} // namespace
BENCHMARK_MAIN();
