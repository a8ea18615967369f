// Microbenchmarks for the convolution kernel paths and the planned executor.
// Shapes mirror the network's hot layers at a reduced grid so a full sweep
// stays under a minute on one core.

#include <benchmark/benchmark.h>

#include <cstdint>

#include "cobra/engine.hpp"
#include "cobra/kernels.hpp"
#include "cobra/model.hpp"
#include "cobra/passes.hpp"
#include "cobra/rng.hpp"
#include "cobra/tensor.hpp"

namespace {

using namespace cobra;

Tensor filled(const std::vector<int64_t>& dims, uint64_t seed) {
    Tensor t(dims);
    for (int64_t i = 0; i < t.numel(); ++i)
        t.data()[i] = static_cast<float>(rng::uniform01(seed, uint64_t(i)) - 0.5) * 0.25f;
    return t;
}

ConvSpec spec_for(int64_t cin, int64_t cout, std::array<int64_t, 3> kernel,
                  std::array<int64_t, 3> stride, std::array<int64_t, 3> pad) {
    ConvSpec s;
    s.in_channels = cin;
    s.out_channels = cout;
    s.kernel = kernel;
    s.stride = stride;
    s.pad = pad;
    s.bias = false;
    return s;
}

void conv_pointwise(benchmark::State& state) {
    const Tensor x = filled({96, 24, 48, 48}, 1);
    const Tensor w = filled({24, 96, 1, 1, 1}, 2);
    const ConvSpec s = spec_for(96, 24, {1, 1, 1}, {1, 1, 1}, {0, 0, 0});
    for (auto _ : state) benchmark::DoNotOptimize(conv3d_fast(x, w, nullptr, s));
}
BENCHMARK(conv_pointwise)->Unit(benchmark::kMillisecond);

void conv_axis(benchmark::State& state) {
    const Tensor x = filled({24, 24, 48, 48}, 3);
    const Tensor w = filled({24, 24, 3, 1, 1}, 4);
    const ConvSpec s = spec_for(24, 24, {3, 1, 1}, {1, 1, 1}, {1, 0, 0});
    for (auto _ : state) benchmark::DoNotOptimize(conv3d_fast(x, w, nullptr, s));
}
BENCHMARK(conv_axis)->Unit(benchmark::kMillisecond);

void conv_cubic(benchmark::State& state) {
    const Tensor x = filled({16, 24, 48, 48}, 5);
    const Tensor w = filled({16, 16, 3, 3, 3}, 6);
    const ConvSpec s = spec_for(16, 16, {3, 3, 3}, {1, 1, 1}, {1, 1, 1});
    for (auto _ : state) benchmark::DoNotOptimize(conv3d_fast(x, w, nullptr, s));
}
BENCHMARK(conv_cubic)->Unit(benchmark::kMillisecond);

void conv_transpose_up(benchmark::State& state) {
    const Tensor x = filled({40, 12, 24, 24}, 7);
    const Tensor w = filled({40, 40, 2, 2, 2}, 8);
    const ConvSpec s = spec_for(40, 40, {2, 2, 2}, {2, 2, 2}, {0, 0, 0});
    for (auto _ : state) benchmark::DoNotOptimize(conv_transpose3d(x, w, nullptr, s));
}
BENCHMARK(conv_transpose_up)->Unit(benchmark::kMillisecond);

// Full network forward at a quarter-size grid, before and after the graph
// rewrites, so the fusion win is visible in one table.
void network(benchmark::State& state, bool optimized) {
    Model m = build_cobra(ArchConfig::reference(), true, WeightInit::he_normal, 1);
    m.graph.inputs[0].dims = {2, 32, 64, 64};
    if (optimized) m = optimize(std::move(m));
    const Tensor x = filled({2, 32, 64, 64}, 9);
    Executor ex(m.graph, m.weights, int(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(ex.run(x));
}
void network_unoptimized(benchmark::State& state) { network(state, false); }
void network_optimized(benchmark::State& state) { network(state, true); }
BENCHMARK(network_unoptimized)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(3);
BENCHMARK(network_optimized)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
