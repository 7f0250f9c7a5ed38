#include "mmcrf/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>

namespace mmcrf {
namespace kernels {

namespace {

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += a[i] * b[i];
    return acc;
}

void s_axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        y[i] += alpha * x[i];
}

void s_scale_copy(double alpha, const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = alpha * x[i];
}

void s_scale_add_scalar(double alpha, const double* x, double beta,
                        double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = alpha * x[i] + beta;
}

void s_scale_add_vec(double alpha, const double* x, const double* y,
                     double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = alpha * x[i] + y[i];
}

void s_mul(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = a[i] * b[i];
}

void s_matvec(const double* w, const double* x, double* out,
              std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        out[r] = s_dot(w + r * cols, x, cols);
}

void s_ger(const double* g, const double* x, double* w,
           std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        s_axpy(g[r], x, w + r * cols, cols);
}

void s_vexp(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = std::exp(x[i]);
}

double s_vmax(const double* x, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] > m)
            m = x[i];
    return m;
}

double s_lse(const double* x, std::size_t n) {
    const double m = s_vmax(x, n);
    if (!std::isfinite(m))
        return m;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += std::exp(x[i] - m);
    return m + std::log(acc);
}

void s_softmax(const double* x, double* out, std::size_t n) {
    const double l = s_lse(x, n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = std::exp(x[i] - l);
}

void s_lse_stream(const double* v, double* acc_max, double* acc_sum,
                  std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (v[i] <= acc_max[i]) {
            acc_sum[i] += std::exp(v[i] - acc_max[i]);
        } else {
            acc_sum[i] = acc_sum[i] * std::exp(acc_max[i] - v[i]) + 1.0;
            acc_max[i] = v[i];
        }
    }
}

const Backend k_scalar = {
    "scalar",
    s_dot, s_axpy, s_scale_copy, s_scale_add_scalar, s_scale_add_vec,
    s_mul, s_matvec, s_ger, s_vexp, s_vmax, s_lse, s_softmax, s_lse_stream,
};

std::atomic<const Backend*> g_active{nullptr};

const Backend* pick_default() {
    const char* env = std::getenv("MMCRF_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0)
        return &k_scalar;
    if (env && std::strcmp(env, "avx2") == 0) {
        if (const Backend* b = avx2_backend())
            return b;
        return &k_scalar;
    }
    if (const Backend* b = avx2_backend())
        return b;
    return &k_scalar;
}

} // namespace

const Backend& scalar_backend() {
    return k_scalar;
}

const Backend& active() {
    const Backend* b = g_active.load(std::memory_order_acquire);
    if (!b) {
        b = pick_default();
        g_active.store(b, std::memory_order_release);
    }
    return *b;
}

bool select(const char* name) {
    if (std::strcmp(name, "scalar") == 0) {
        g_active.store(&k_scalar, std::memory_order_release);
        return true;
    }
    if (std::strcmp(name, "avx2") == 0) {
        if (const Backend* b = avx2_backend()) {
            g_active.store(b, std::memory_order_release);
            return true;
        }
        return false;
    }
    if (std::strcmp(name, "auto") == 0) {
        g_active.store(pick_default(), std::memory_order_release);
        return true;
    }
    return false;
}

} // namespace kernels
} // namespace mmcrf
