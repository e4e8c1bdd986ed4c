// Serial reference kernels against their OpenMP versions on representative sizes.
// Set OMP_NUM_THREADS to compare thread counts.

#include <benchmark/benchmark.h>

#include <random>

#include "nisp/kernels.hpp"

namespace ks = nisp::kernels::serial;
namespace ko = nisp::kernels::omp;
using nisp::Geometry;
using nisp::Matrix;
using nisp::Vec;

namespace {

Vec random_vec(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec v(n);
    for (double& x : v) x = u(rng);
    return v;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    const Vec v = random_vec(rows * cols, seed);
    std::copy(v.begin(), v.end(), m.data().begin());
    return m;
}

Geometry conv_geometry(std::size_t channels) {
    return {32, 32, 3, 1, 1, channels, channels};
}

template <bool Omp>
void BM_DenseForward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix w = random_matrix(n, n, 1);
    const Vec b = random_vec(n, 2), x = random_vec(n, 3);
    for (auto _ : state) benchmark::DoNotOptimize(Omp ? ko::dense_forward(w, b, x) : ks::dense_forward(w, b, x));
}

template <bool Omp>
void BM_ConvForward(benchmark::State& state) {
    const Geometry g = conv_geometry(static_cast<std::size_t>(state.range(0)));
    const Vec k = random_vec(9 * g.in_channels * g.out_channels, 4);
    const Vec b = random_vec(g.out_channels, 5), x = random_vec(g.in_channels * 32 * 32, 6);
    for (auto _ : state) benchmark::DoNotOptimize(Omp ? ko::conv_forward(g, k, b, x) : ks::conv_forward(g, k, b, x));
}

template <bool Omp>
void BM_ConvImportance(benchmark::State& state) {
    const Geometry g = conv_geometry(static_cast<std::size_t>(state.range(0)));
    const Vec k = random_vec(9 * g.in_channels * g.out_channels, 7);
    Vec s = random_vec(g.out_channels * 32 * 32, 8);
    for (double& v : s) v = v < 0 ? -v : v;
    for (auto _ : state) benchmark::DoNotOptimize(Omp ? ko::conv_importance(g, k, s) : ks::conv_importance(g, k, s));
}

template <bool Omp>
void BM_Affinity(benchmark::State& state) {
    const Matrix r = random_matrix(500, static_cast<std::size_t>(state.range(0)), 9);
    for (auto _ : state) benchmark::DoNotOptimize(Omp ? ko::affinity(r, 0.5) : ks::affinity(r, 0.5));
}

template <bool Omp>
void BM_Solve(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Matrix a = random_matrix(n, n, 10);
    for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
    const Matrix b = random_matrix(n, 1, 11);
    for (auto _ : state) benchmark::DoNotOptimize(Omp ? ko::solve(a, b, 1e-14) : ks::solve(a, b, 1e-14));
}

}  // namespace

BENCHMARK(BM_DenseForward<false>)->Name("dense_forward/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_DenseForward<true>)->Name("dense_forward/omp")->Arg(256)->Arg(1024);
BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/serial")->Arg(16)->Arg(32);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/omp")->Arg(16)->Arg(32);
BENCHMARK(BM_ConvImportance<false>)->Name("conv_importance/serial")->Arg(16)->Arg(32);
BENCHMARK(BM_ConvImportance<true>)->Name("conv_importance/omp")->Arg(16)->Arg(32);
BENCHMARK(BM_Affinity<false>)->Name("affinity/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Affinity<true>)->Name("affinity/omp")->Arg(64)->Arg(256);
BENCHMARK(BM_Solve<false>)->Name("solve/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Solve<true>)->Name("solve/omp")->Arg(64)->Arg(256);

BENCHMARK_MAIN();
