// Serial vs OpenMP kernels at a few sizes around the dispatch threshold.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "spandet/kernels.hpp"

namespace k = spandet::kernels;

namespace {

std::vector<double> random_values(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

template <auto Gemm>
void bm_gemm(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const k::GemmDims d{n, n, n};
    const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        std::fill(c.begin(), c.end(), 0.0);
        Gemm(a, b, c, d);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

template <auto Softmax>
void bm_softmax(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const std::size_t cols = 256;
    const auto x = random_values(rows * cols, 3);
    std::vector<double> y(rows * cols);
    for (auto _ : state) {
        Softmax(x, {}, y, rows, cols);
        benchmark::DoNotOptimize(y.data());
    }
}

}  // namespace

BENCHMARK(bm_gemm<k::serial::gemm_nn>)->Name("gemm_nn/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_gemm<k::parallel::gemm_nn>)->Name("gemm_nn/parallel")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_gemm<k::serial::gemm_nt>)->Name("gemm_nt/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_gemm<k::parallel::gemm_nt>)->Name("gemm_nt/parallel")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_softmax<k::serial::softmax_rows>)->Name("softmax/serial")->RangeMultiplier(4)->Range(16, 4096);
BENCHMARK(bm_softmax<k::parallel::softmax_rows>)->Name("softmax/parallel")->RangeMultiplier(4)->Range(16, 4096);

BENCHMARK_MAIN();
