// End-to-end network benchmarks: inference forward pass and the full
// training step (forward, all gradients) at two widths.
#include <benchmark/benchmark.h>

#include "normscape/model.hpp"
#include "normscape/objective.hpp"
#include "normscape/rng.hpp"

using namespace normscape;

namespace {

Tensor<float> random_image(int64_t n, int64_t side, Rng& rng) {
    Tensor<float> t({n, 1, side, side});
    for (int64_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<float>(rng.next_double());
    }
    return t;
}

ModelConfig desk_width() {
    ModelConfig cfg;
    cfg.embed_features = 32;
    cfg.wide_features = 32;
    cfg.narrow_features = 16;
    return cfg;
}

void bm_forward(benchmark::State& state, const ModelConfig& cfg) {
    Rng rng(11);
    const auto params = build_model<float>(cfg, 7);
    const auto input = random_image(state.range(0), 41, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(params, input));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void bm_train_step(benchmark::State& state, const ModelConfig& cfg) {
    Rng rng(13);
    const auto params = build_model<float>(cfg, 7);
    const auto input = random_image(state.range(0), 41, rng);
    const auto target = random_image(state.range(0), 41, rng);
    const ObjectiveConfig oc;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            total_loss_and_grads(params, input, target, NormSetting::mix, oc, 1.0));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void bm_forward_desk(benchmark::State& state) { bm_forward(state, desk_width()); }
void bm_forward_full(benchmark::State& state) { bm_forward(state, ModelConfig{}); }
void bm_train_step_desk(benchmark::State& state) { bm_train_step(state, desk_width()); }
void bm_train_step_full(benchmark::State& state) { bm_train_step(state, ModelConfig{}); }

BENCHMARK(bm_forward_desk)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_forward_full)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_train_step_desk)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_train_step_full)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
