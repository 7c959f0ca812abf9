#include "spandet/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

namespace spandet::kernels {

namespace {

std::atomic<Mode> g_mode{Mode::parallel};

// One output row per call; shared by both variants so the arithmetic is
// literally the same instruction sequence.
inline void row_nn(const double* a, const double* b, double* c, std::size_t i, GemmDims d) {
    const double* arow = a + i * d.k;
    double* crow = c + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
        const double av = arow[p];
        const double* brow = b + p * d.n;
        for (std::size_t j = 0; j < d.n; ++j) crow[j] += av * brow[j];
    }
}

inline void row_nt(const double* a, const double* b, double* c, std::size_t i, GemmDims d) {
    const double* arow = a + i * d.k;
    double* crow = c + i * d.n;
    for (std::size_t j = 0; j < d.n; ++j) {
        const double* brow = b + j * d.k;
        double acc = 0.0;
        for (std::size_t p = 0; p < d.k; ++p) acc += arow[p] * brow[p];
        crow[j] += acc;
    }
}

// a is stored [k, m]; row i of the result walks column i of a.
inline void row_tn(const double* a, const double* b, double* c, std::size_t i, GemmDims d) {
    double* crow = c + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
        const double av = a[p * d.m + i];
        const double* brow = b + p * d.n;
        for (std::size_t j = 0; j < d.n; ++j) crow[j] += av * brow[j];
    }
}

inline void row_softmax(const double* x, const std::uint8_t* mask, double* y, std::size_t i, std::size_t cols) {
    const double* xr = x + i * cols;
    double* yr = y + i * cols;
    const std::uint8_t* mr = mask ? mask + i * cols : nullptr;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) {
        if (mr && mr[j]) continue;
        mx = std::max(mx, xr[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        if (mr && mr[j]) {
            yr[j] = 0.0;
            continue;
        }
        yr[j] = std::exp(xr[j] - mx);
        sum += yr[j];
    }
    if (sum > 0.0) {
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

const std::uint8_t* mask_ptr(std::span<const std::uint8_t> mask) { return mask.empty() ? nullptr : mask.data(); }

bool worth_parallel(std::size_t work) { return g_mode.load(std::memory_order_relaxed) == Mode::parallel && work >= kParallelWorkThreshold; }

}  // namespace

void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }
Mode mode() { return g_mode.load(std::memory_order_relaxed); }

bool openmp_available() {
#ifdef SPANDET_HAVE_OPENMP
    return true;
#else
    return false;
#endif
}

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d) {
    for (std::size_t i = 0; i < d.m; ++i) row_nn(a.data(), b.data(), c.data(), i, d);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d) {
    for (std::size_t i = 0; i < d.m; ++i) row_nt(a.data(), b.data(), c.data(), i, d);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d) {
    for (std::size_t i = 0; i < d.m; ++i) row_tn(a.data(), b.data(), c.data(), i, d);
}

void softmax_rows(std::span<const double> x, std::span<const std::uint8_t> mask, std::span<double> y,
                  std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) row_softmax(x.data(), mask_ptr(mask), y.data(), i, cols);
}

}  // namespace serial

namespace parallel {

// Signed loop counters keep older OpenMP runtimes happy.
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d) {
    const auto rows = static_cast<std::ptrdiff_t>(d.m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) row_nn(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), d);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d) {
    const auto rows = static_cast<std::ptrdiff_t>(d.m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) row_nt(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), d);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d) {
    const auto rows = static_cast<std::ptrdiff_t>(d.m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) row_tn(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), d);
}

void softmax_rows(std::span<const double> x, std::span<const std::uint8_t> mask, std::span<double> y,
                  std::size_t rows, std::size_t cols) {
    const auto n = static_cast<std::ptrdiff_t>(rows);
    const std::uint8_t* m = mask_ptr(mask);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) row_softmax(x.data(), m, y.data(), static_cast<std::size_t>(i), cols);
}

}  // namespace parallel

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d) {
    if (worth_parallel(d.m * d.k * d.n))
        parallel::gemm_nn(a, b, c, d);
    else
        serial::gemm_nn(a, b, c, d);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d) {
    if (worth_parallel(d.m * d.k * d.n))
        parallel::gemm_nt(a, b, c, d);
    else
        serial::gemm_nt(a, b, c, d);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d) {
    if (worth_parallel(d.m * d.k * d.n))
        parallel::gemm_tn(a, b, c, d);
    else
        serial::gemm_tn(a, b, c, d);
}

void softmax_rows(std::span<const double> x, std::span<const std::uint8_t> mask, std::span<double> y,
                  std::size_t rows, std::size_t cols) {
    if (worth_parallel(rows * cols * 8))
        parallel::softmax_rows(x, mask, y, rows, cols);
    else
        serial::softmax_rows(x, mask, y, rows, cols);
}

}  // namespace spandet::kernels
