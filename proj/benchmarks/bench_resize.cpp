// Bicubic resampling benchmarks at evaluation-set image sizes.
#include <benchmark/benchmark.h>

#include "normscape/resize.hpp"
#include "normscape/rng.hpp"

using namespace normscape;

namespace {

Tensor<double> random_luma(int64_t h, int64_t w, Rng& rng) {
    Tensor<double> t({1, h, w});
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.next_double();
    return t;
}

void bm_downscale_2x(benchmark::State& state) {
    Rng rng(5);
    const int64_t side = state.range(0);
    const auto img = random_luma(side, side, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bicubic_resize(img, side / 2, side / 2));
    }
    state.SetItemsProcessed(state.iterations());
}

void bm_upscale_2x(benchmark::State& state) {
    Rng rng(6);
    const int64_t side = state.range(0);
    const auto img = random_luma(side / 2, side / 2, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bicubic_resize(img, side, side));
    }
    state.SetItemsProcessed(state.iterations());
}

BENCHMARK(bm_downscale_2x)->Arg(160)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_upscale_2x)->Arg(160)->Arg(512)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
