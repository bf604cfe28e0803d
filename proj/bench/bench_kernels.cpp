// Serial reference kernels against the OpenMP ones on the shapes of one
// training step at D=512.

#include "patcls/kernels.hpp"
#include "patcls/neuralnet.hpp"
#include "patcls/random.hpp"

#include <benchmark/benchmark.h>

using namespace patcls;
namespace k = patcls::kernels;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(r, c);
    for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
    return m;
}

template <bool Parallel>
void BM_AffineForward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto x = random_matrix(n, 512, 1);
    const auto w = random_matrix(256, 512, 2);
    const std::vector<double> b(256, 0.1);
    Matrix y;
    for (auto _ : state) {
        if constexpr (Parallel) {
            k::omp::affine_forward(x, w, b, y);
        } else {
            k::serial::affine_forward(x, w, b, y);
        }
        benchmark::DoNotOptimize(y.data.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 512 * 256));
}

template <bool Parallel>
void BM_AffineBackward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto x = random_matrix(n, 512, 1);
    const auto w = random_matrix(256, 512, 2);
    const auto dy = random_matrix(n, 256, 3);
    Matrix dw, dx;
    std::vector<double> db(256);
    for (auto _ : state) {
        if constexpr (Parallel) {
            k::omp::affine_backward_params(dy, x, dw, db);
            k::omp::affine_backward_input(dy, w, dx);
        } else {
            k::serial::affine_backward_params(dy, x, dw, db);
            k::serial::affine_backward_input(dy, w, dx);
        }
        benchmark::DoNotOptimize(dw.data.data());
        benchmark::DoNotOptimize(dx.data.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * 512 * 256));
}

void BM_TrainStep(benchmark::State& state, bool parallel) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto x = random_matrix(n, 512, 1);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 10);
    auto model = init_mlp(512, 10, 7);
    auto adam = AdamState::for_model(model);
    const bool before = k::parallel_enabled();
    k::set_parallel(parallel);
    for (auto _ : state) {
        const auto fwd = forward(model, x);
        adam_step(model, backward(model, fwd.cache, y), adam);
    }
    k::set_parallel(before);
}

} // namespace

BENCHMARK(BM_AffineForward<false>)->Name("affine_forward/serial")->Arg(32)->Arg(256);
BENCHMARK(BM_AffineForward<true>)->Name("affine_forward/omp")->Arg(32)->Arg(256);
BENCHMARK(BM_AffineBackward<false>)->Name("affine_backward/serial")->Arg(32)->Arg(256);
BENCHMARK(BM_AffineBackward<true>)->Name("affine_backward/omp")->Arg(32)->Arg(256);
BENCHMARK_CAPTURE(BM_TrainStep, serial, false)->Arg(32)->Arg(256);
BENCHMARK_CAPTURE(BM_TrainStep, omp, true)->Arg(32)->Arg(256);

BENCHMARK_MAIN();
