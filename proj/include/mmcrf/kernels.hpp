#pragma once

#include <cstddef>

namespace mmcrf {
namespace kernels {

// Dense double-precision primitives behind the inference and learning inner
// loops. Every entry point has a scalar reference implementation and an
// optional AVX2 variant; the active backend is chosen once per process.
//
// lse_stream is the online log-sum-exp update used when reducing a cost
// table row by row: for each lane j,
//   m            = max(acc_max[j], v[j])
//   acc_sum[j]   = acc_sum[j] * exp(acc_max[j] - m) + exp(v[j] - m)
//   acc_max[j]   = m
// Callers initialize acc_max to -inf and acc_sum to 0 and finish with
// out[j] = acc_max[j] + log(acc_sum[j]).
struct Backend {
    const char* name;

    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // out = alpha * x
    void (*scale_copy)(double alpha, const double* x, double* out, std::size_t n);
    // out = alpha * x + beta
    void (*scale_add_scalar)(double alpha, const double* x, double beta,
                             double* out, std::size_t n);
    // out = alpha * x + y
    void (*scale_add_vec)(double alpha, const double* x, const double* y,
                          double* out, std::size_t n);
    // out = a * b (elementwise)
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    // out[r] = dot(w[r*cols .. ], x), row-major w
    void (*matvec)(const double* w, const double* x, double* out,
                   std::size_t rows, std::size_t cols);
    // w += g x^T (rank-1 update, row-major w)
    void (*ger)(const double* g, const double* x, double* w,
                std::size_t rows, std::size_t cols);
    void (*vexp)(const double* x, double* out, std::size_t n);
    double (*vmax)(const double* x, std::size_t n);
    double (*lse)(const double* x, std::size_t n);
    // out = exp(x - lse(x)), sums to 1
    void (*softmax)(const double* x, double* out, std::size_t n);
    void (*lse_stream)(const double* v, double* acc_max, double* acc_sum,
                       std::size_t n);
};

const Backend& scalar_backend();

// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const Backend* avx2_backend();

// Active process-wide backend. Defaults to the widest supported one; the
// MMCRF_KERNELS environment variable ("scalar", "avx2", "auto") is honored
// on first use.
const Backend& active();

// Force a backend by name; returns false (and leaves the selection alone)
// when the request cannot be honored.
bool select(const char* name);

} // namespace kernels
} // namespace mmcrf
