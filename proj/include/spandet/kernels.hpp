#pragma once

// Dense inner loops used by the autodiff core. Every kernel exists twice:
// a serial reference and an OpenMP variant that splits the outer (row)
// loop across threads. Each output element is produced by exactly one
// thread with the same accumulation order, so both variants agree bitwise.

#include <cstddef>
#include <cstdint>
#include <span>

namespace spandet::kernels {

enum class Mode { serial, parallel };

/// Process-wide selection used by the dispatching entry points below.
void set_mode(Mode mode);
Mode mode();

/// True when the library was compiled with OpenMP.
bool openmp_available();

// Row-major GEMM variants; all accumulate into c (c += ...).
//   nn: c[m,n] += a[m,k] * b[k,n]
//   nt: c[m,n] += a[m,k] * b[n,k]^T
//   tn: c[m,n] += a[k,m]^T * b[k,n]
struct GemmDims {
    std::size_t m = 0;
    std::size_t k = 0;
    std::size_t n = 0;
};

namespace serial {
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
// Row softmax; entries with mask[i] != 0 get probability exactly 0.
// An empty mask means nothing is masked.
void softmax_rows(std::span<const double> x, std::span<const std::uint8_t> mask, std::span<double> y,
                  std::size_t rows, std::size_t cols);
}  // namespace serial

namespace parallel {
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
void softmax_rows(std::span<const double> x, std::span<const std::uint8_t> mask, std::span<double> y,
                  std::size_t rows, std::size_t cols);
}  // namespace parallel

// Dispatch on mode(). The parallel path is only taken above a work
// threshold; below it thread start-up dominates.
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
void softmax_rows(std::span<const double> x, std::span<const std::uint8_t> mask, std::span<double> y,
                  std::size_t rows, std::size_t cols);

inline constexpr std::size_t kParallelWorkThreshold = 1u << 16;

}  // namespace spandet::kernels
