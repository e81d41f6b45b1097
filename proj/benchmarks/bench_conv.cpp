// Microbenchmarks for the convolution kernels: the blocked implementation
// against the reference loop nest it is validated against.
#include <benchmark/benchmark.h>

#include "normscape/conv.hpp"
#include "normscape/rng.hpp"

using namespace normscape;

namespace {

Tensor<float> random_tensor(const std::vector<int64_t>& shape, Rng& rng) {
    Tensor<float> t(shape);
    for (int64_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<float>(rng.next_double() * 2.0 - 1.0);
    }
    return t;
}

// Shapes mirror the network layers on a training patch: state.range(0) is
// the batch, the rest is fixed per benchmark.
void bm_conv3x3_wide(benchmark::State& state) {
    Rng rng(1);
    const int64_t n = state.range(0);
    const ConvSpec spec = ConvSpec::make(192, 288, 3);
    const auto input = random_tensor({n, 192, 41, 41}, rng);
    const auto weights = random_tensor({288, 192, 3, 3}, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d_forward(input, weights, spec));
    }
    state.SetItemsProcessed(state.iterations() * n);
}

void bm_conv3x3_wide_naive(benchmark::State& state) {
    Rng rng(1);
    const int64_t n = state.range(0);
    const ConvSpec spec = ConvSpec::make(192, 288, 3);
    const auto input = random_tensor({n, 192, 41, 41}, rng);
    const auto weights = random_tensor({288, 192, 3, 3}, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d_forward_naive(input, weights, spec));
    }
    state.SetItemsProcessed(state.iterations() * n);
}

void bm_conv1x1_shrink(benchmark::State& state) {
    Rng rng(2);
    const int64_t n = state.range(0);
    const ConvSpec spec = ConvSpec::make(288, 144, 1);
    const auto input = random_tensor({n, 288, 41, 41}, rng);
    const auto weights = random_tensor({144, 288, 1, 1}, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d_forward(input, weights, spec));
    }
    state.SetItemsProcessed(state.iterations() * n);
}

void bm_conv3x3_backward(benchmark::State& state) {
    Rng rng(3);
    const int64_t n = state.range(0);
    const ConvSpec spec = ConvSpec::make(144, 288, 3);
    const auto input = random_tensor({n, 144, 41, 41}, rng);
    const auto weights = random_tensor({288, 144, 3, 3}, rng);
    const auto upstream = random_tensor({n, 288, 41, 41}, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d_backward(input, weights, upstream, spec));
    }
    state.SetItemsProcessed(state.iterations() * n);
}

BENCHMARK(bm_conv3x3_wide)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_conv3x3_wide_naive)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_conv1x1_shrink)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_conv3x3_backward)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
