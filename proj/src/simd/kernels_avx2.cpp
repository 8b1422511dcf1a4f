// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "ltc/simd.hpp"

namespace ltc::simd {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    if (i + 4 <= n) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        i += 4;
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double squared_distance_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
        acc0 = _mm256_fmadd_pd(d0, d0, acc0);
        acc1 = _mm256_fmadd_pd(d1, d1, acc1);
    }
    if (i + 4 <= n) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc0 = _mm256_fmadd_pd(d0, d0, acc0);
        i += 4;
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void gemv_avx2(const double* w, std::size_t rows, std::size_t cols,
               const double* x, const double* bias, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double v = dot_avx2(w + r * cols, x, cols);
        y[r] = bias ? v + bias[r] : v;
    }
}

void gemv_t_acc_avx2(const double* w, std::size_t rows, std::size_t cols,
                     const double* g, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        if (g[r] != 0.0) axpy_avx2(g[r], w + r * cols, y, cols);
    }
}

void outer_acc_avx2(const double* g, std::size_t rows, const double* x,
                    std::size_t cols, double* out) {
    for (std::size_t r = 0; r < rows; ++r) {
        if (g[r] != 0.0) axpy_avx2(g[r], x, out + r * cols, cols);
    }
}

}  // namespace

extern const KernelTable kAvx2Table;
const KernelTable kAvx2Table{
    dot_avx2, squared_distance_avx2, axpy_avx2,
    gemv_avx2, gemv_t_acc_avx2, outer_acc_avx2,
};

}  // namespace ltc::simd
