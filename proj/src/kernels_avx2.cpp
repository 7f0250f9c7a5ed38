#include "mmcrf/kernels.hpp"

#if defined(MMCRF_BUILD_AVX2)

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace mmcrf {
namespace kernels {

namespace {

// Cephes-style exp: range-reduce by n = round(x/log 2), evaluate the rational
// approximation exp(r) = 1 + 2 px / (qx - px), then scale by 2^n in two
// steps. Arguments below -708 flush to zero rather than producing
// denormals; feeding denormals into downstream fmas costs microcode
// assists on every penalized message lane.
inline __m256d exp4(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
    const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
    const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
    const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
    const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
    const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
    const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
    const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
    const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d hi = _mm256_set1_pd(709.782712893384);
    const __m256d lo = _mm256_set1_pd(-708.0);

    const __m256d over = _mm256_cmp_pd(x, hi, _CMP_GT_OQ);
    const __m256d under = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
    __m256d xx = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

    const __m256d n = _mm256_round_pd(
        _mm256_mul_pd(xx, log2e),
        _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    xx = _mm256_fnmadd_pd(n, c1, xx);
    xx = _mm256_fnmadd_pd(n, c2, xx);

    const __m256d x2 = _mm256_mul_pd(xx, xx);
    __m256d px = _mm256_fmadd_pd(p0, x2, p1);
    px = _mm256_fmadd_pd(px, x2, p2);
    px = _mm256_mul_pd(px, xx);
    __m256d qx = _mm256_fmadd_pd(q0, x2, q1);
    qx = _mm256_fmadd_pd(qx, x2, q2);
    qx = _mm256_fmadd_pd(qx, x2, q3);
    __m256d r = _mm256_div_pd(_mm256_mul_pd(two, px), _mm256_sub_pd(qx, px));
    r = _mm256_add_pd(one, r);

    // r *= 2^n, split as 2^(n/2) * 2^(n - n/2); n fits in int32.
    const __m128i ni = _mm256_cvtpd_epi32(n);
    const __m128i n1 = _mm_srai_epi32(ni, 1);
    const __m128i n2 = _mm_sub_epi32(ni, n1);
    const __m256i bias = _mm256_set1_epi64x(1023);
    const __m256i e1 =
        _mm256_slli_epi64(_mm256_add_epi64(_mm256_cvtepi32_epi64(n1), bias), 52);
    const __m256i e2 =
        _mm256_slli_epi64(_mm256_add_epi64(_mm256_cvtepi32_epi64(n2), bias), 52);
    r = _mm256_mul_pd(_mm256_mul_pd(r, _mm256_castsi256_pd(e1)),
                      _mm256_castsi256_pd(e2));

    r = _mm256_blendv_pd(
        r, _mm256_set1_pd(std::numeric_limits<double>::infinity()), over);
    r = _mm256_blendv_pd(r, _mm256_setzero_pd(), under);
    return r;
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

inline double hmax(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_max_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double a_dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i)
        s += a[i] * b[i];
    return s;
}

void a_axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                                _mm256_loadu_pd(y + i)));
    for (; i < n; ++i)
        y[i] += alpha * x[i];
}

void a_scale_copy(double alpha, const double* x, double* out, std::size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i)
        out[i] = alpha * x[i];
}

void a_scale_add_scalar(double alpha, const double* x, double beta,
                        double* out, std::size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    const __m256d bv = _mm256_set1_pd(beta);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), bv));
    for (; i < n; ++i)
        out[i] = alpha * x[i] + beta;
}

void a_scale_add_vec(double alpha, const double* x, const double* y,
                     double* out, std::size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                                  _mm256_loadu_pd(y + i)));
    for (; i < n; ++i)
        out[i] = alpha * x[i] + y[i];
}

void a_mul(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i)
        out[i] = a[i] * b[i];
}

void a_matvec(const double* w, const double* x, double* out,
              std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        out[r] = a_dot(w + r * cols, x, cols);
}

void a_ger(const double* g, const double* x, double* w,
           std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        a_axpy(g[r], x, w + r * cols, cols);
}

void a_vexp(const double* x, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
    for (; i < n; ++i)
        out[i] = std::exp(x[i]);
}

double a_vmax(const double* x, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    if (n >= 4) {
        __m256d mv = _mm256_loadu_pd(x);
        for (i = 4; i + 4 <= n; i += 4)
            mv = _mm256_max_pd(mv, _mm256_loadu_pd(x + i));
        m = hmax(mv);
    }
    for (; i < n; ++i)
        if (x[i] > m)
            m = x[i];
    return m;
}

double a_lse(const double* x, std::size_t n) {
    const double m = a_vmax(x, n);
    if (!std::isfinite(m))
        return m;
    const __m256d mv = _mm256_set1_pd(m);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, exp4(_mm256_sub_pd(_mm256_loadu_pd(x + i), mv)));
    double s = hsum(acc);
    for (; i < n; ++i)
        s += std::exp(x[i] - m);
    return m + std::log(s);
}

void a_softmax(const double* x, double* out, std::size_t n) {
    const double l = a_lse(x, n);
    const __m256d lv = _mm256_set1_pd(l);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, exp4(_mm256_sub_pd(_mm256_loadu_pd(x + i), lv)));
    for (; i < n; ++i)
        out[i] = std::exp(x[i] - l);
}

void a_lse_stream(const double* v, double* acc_max, double* acc_sum,
                  std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vv = _mm256_loadu_pd(v + i);
        const __m256d am = _mm256_loadu_pd(acc_max + i);
        const __m256d as = _mm256_loadu_pd(acc_sum + i);
        const __m256d m = _mm256_max_pd(am, vv);
        const __m256d lo = _mm256_min_pd(am, vv);
        // one exponential per lane: e = exp(min - max)
        const __m256d e = exp4(_mm256_sub_pd(lo, m));
        const __m256d grew = _mm256_cmp_pd(vv, am, _CMP_GT_OQ);
        const __m256d sum = _mm256_blendv_pd(_mm256_add_pd(as, e),
                                             _mm256_fmadd_pd(as, e, one), grew);
        _mm256_storeu_pd(acc_max + i, m);
        _mm256_storeu_pd(acc_sum + i, sum);
    }
    for (; i < n; ++i) {
        if (v[i] <= acc_max[i]) {
            acc_sum[i] += std::exp(v[i] - acc_max[i]);
        } else {
            acc_sum[i] = acc_sum[i] * std::exp(acc_max[i] - v[i]) + 1.0;
            acc_max[i] = v[i];
        }
    }
}

const Backend k_avx2 = {
    "avx2",
    a_dot, a_axpy, a_scale_copy, a_scale_add_scalar, a_scale_add_vec,
    a_mul, a_matvec, a_ger, a_vexp, a_vmax, a_lse, a_softmax, a_lse_stream,
};

} // namespace

const Backend* avx2_backend() {
    static const bool supported =
        __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &k_avx2 : nullptr;
}

} // namespace kernels
} // namespace mmcrf

#else // !MMCRF_BUILD_AVX2

namespace mmcrf {
namespace kernels {

const Backend* avx2_backend() {
    return nullptr;
}

} // namespace kernels
} // namespace mmcrf

#endif
