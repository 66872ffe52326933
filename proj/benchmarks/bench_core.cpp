#include <random>

#include <benchmark/benchmark.h>

#include "mixnet/blocks.hpp"
#include "mixnet/model.hpp"
#include "mixnet/ops.hpp"

namespace {

using namespace mixnet;

Tensor<float> random_tensor(Shape s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    Tensor<float> t(s);
    for (i64 i = 0; i < t.numel(); ++i) t.data()[i] = dist(rng);
    return t;
}

void bm_conv3x3(benchmark::State& state) {
    const i64 c = 48, hw = state.range(0);
    Tensor<float> x = random_tensor(Shape{1, c, hw, hw}, 1);
    Tensor<float> w = random_tensor(Shape{c, c, 3, 3}, 2);
    Tensor<float> b = random_tensor(Shape{1, c, 1, 1}, 3);
    for (auto _ : state) {
        Tensor<float> y = ops::conv3x3(x, w, b);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * hw * hw);
}
BENCHMARK(bm_conv3x3)->Arg(128)->Arg(256);

void bm_fmb_forward(benchmark::State& state) {
    const i64 hw = state.range(0);
    ModelConfig cfg;
    cfg.num_fmb = 1;
    WeightStore<float> w = init_weights<float>(cfg, 5);
    // single-block model; sampler cost is negligible next to the FMB
    Tensor<float> x = random_tensor(Shape{1, 3, hw * 2, hw * 2}, 9);
    for (auto _ : state) {
        Tensor<float> y = forward(x, w, cfg);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(bm_fmb_forward)->Arg(64)->Arg(128);

void bm_model_forward_512(benchmark::State& state) {
    ModelConfig cfg;
    WeightStore<float> w = init_weights<float>(cfg, 11);
    Tensor<float> x = random_tensor(Shape{1, 3, 512, 512}, 13);
    for (auto _ : state) {
        Tensor<float> y = forward(x, w, cfg);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(bm_model_forward_512)->Unit(benchmark::kMillisecond)->Iterations(1);

} // namespace

BENCHMARK_MAIN();
