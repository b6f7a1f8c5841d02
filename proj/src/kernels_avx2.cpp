// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 matr contributors
//
// AVX2+FMA kernels. This TU is compiled with -mavx2 -mfma; the dispatcher
// exposes it only when the running CPU reports both features.

#include <matr/kernels.hpp>

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace matr::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// C row tile of 16 columns held in registers across the full k loop.
void gemm_nn_avx2(const double* a, const double* b, double* c, int m, int k, int n,
                  bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<long>(i) * k;
        double* crow = c + static_cast<long>(i) * n;
        int j = 0;
        for (; j + 16 <= n; j += 16) {
            __m256d c0 = _mm256_setzero_pd(), c1 = _mm256_setzero_pd();
            __m256d c2 = _mm256_setzero_pd(), c3 = _mm256_setzero_pd();
            for (int p = 0; p < k; ++p) {
                __m256d av = _mm256_set1_pd(arow[p]);
                const double* brow = b + static_cast<long>(p) * n + j;
                c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 0), c0);
                c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 4), c1);
                c2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 8), c2);
                c3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 12), c3);
            }
            if (accumulate) {
                c0 = _mm256_add_pd(c0, _mm256_loadu_pd(crow + j + 0));
                c1 = _mm256_add_pd(c1, _mm256_loadu_pd(crow + j + 4));
                c2 = _mm256_add_pd(c2, _mm256_loadu_pd(crow + j + 8));
                c3 = _mm256_add_pd(c3, _mm256_loadu_pd(crow + j + 12));
            }
            _mm256_storeu_pd(crow + j + 0, c0);
            _mm256_storeu_pd(crow + j + 4, c1);
            _mm256_storeu_pd(crow + j + 8, c2);
            _mm256_storeu_pd(crow + j + 12, c3);
        }
        for (; j + 4 <= n; j += 4) {
            __m256d c0 = _mm256_setzero_pd();
            for (int p = 0; p < k; ++p) {
                __m256d av = _mm256_set1_pd(arow[p]);
                c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + static_cast<long>(p) * n + j), c0);
            }
            if (accumulate) c0 = _mm256_add_pd(c0, _mm256_loadu_pd(crow + j));
            _mm256_storeu_pd(crow + j, c0);
        }
        for (; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += arow[p] * b[static_cast<long>(p) * n + j];
            crow[j] = accumulate ? crow[j] + s : s;
        }
    }
}

void gemm_nt_avx2(const double* a, const double* b, double* c, int m, int k, int n,
                  bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<long>(i) * k;
        double* crow = c + static_cast<long>(i) * n;
        int j = 0;
        for (; j + 4 <= n; j += 4) {
            __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
            __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
            const double* b0 = b + static_cast<long>(j + 0) * k;
            const double* b1 = b + static_cast<long>(j + 1) * k;
            const double* b2 = b + static_cast<long>(j + 2) * k;
            const double* b3 = b + static_cast<long>(j + 3) * k;
            int p = 0;
            for (; p + 4 <= k; p += 4) {
                __m256d av = _mm256_loadu_pd(arow + p);
                s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), s0);
                s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), s1);
                s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + p), s2);
                s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + p), s3);
            }
            double d0 = hsum(s0), d1 = hsum(s1), d2 = hsum(s2), d3 = hsum(s3);
            for (; p < k; ++p) {
                d0 += arow[p] * b0[p];
                d1 += arow[p] * b1[p];
                d2 += arow[p] * b2[p];
                d3 += arow[p] * b3[p];
            }
            if (accumulate) {
                crow[j + 0] += d0;
                crow[j + 1] += d1;
                crow[j + 2] += d2;
                crow[j + 3] += d3;
            } else {
                crow[j + 0] = d0;
                crow[j + 1] = d1;
                crow[j + 2] = d2;
                crow[j + 3] = d3;
            }
        }
        for (; j < n; ++j) {
            const double* brow = b + static_cast<long>(j) * k;
            __m256d sv = _mm256_setzero_pd();
            int p = 0;
            for (; p + 4 <= k; p += 4)
                sv = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p), _mm256_loadu_pd(brow + p), sv);
            double s = hsum(sv);
            for (; p < k; ++p) s += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + s : s;
        }
    }
}

void gemm_tn_avx2(const double* a, const double* b, double* c, int m, int k, int n,
                  bool accumulate) {
    if (!accumulate)
        for (long i = 0; i < static_cast<long>(m) * n; ++i) c[i] = 0.0;
    for (int p = 0; p < k; ++p) {
        const double* arow = a + static_cast<long>(p) * m;
        const double* brow = b + static_cast<long>(p) * n;
        for (int i = 0; i < m; ++i) {
            __m256d av = _mm256_set1_pd(arow[i]);
            double* crow = c + static_cast<long>(i) * n;
            int j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d cv = _mm256_loadu_pd(crow + j);
                cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv);
                _mm256_storeu_pd(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] += arow[i] * brow[j];
        }
    }
}

void vadd_avx2(const double* a, const double* b, double* out, int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void vsub_avx2(const double* a, const double* b, double* out, int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void vmul_avx2(const double* a, const double* b, double* out, int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy_avx2(double alpha, const double* x, double* y, int n) {
    __m256d av = _mm256_set1_pd(alpha);
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void vscale_avx2(const double* a, double alpha, double* out, int n) {
    __m256d av = _mm256_set1_pd(alpha);
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(av, _mm256_loadu_pd(a + i)));
    for (; i < n; ++i) out[i] = a[i] * alpha;
}

double dot_avx2(const double* a, const double* b, int n) {
    __m256d sv = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4)
        sv = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), sv);
    double s = hsum(sv);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double vsum_avx2(const double* a, int n) {
    __m256d sv = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) sv = _mm256_add_pd(sv, _mm256_loadu_pd(a + i));
    double s = hsum(sv);
    for (; i < n; ++i) s += a[i];
    return s;
}

}  // namespace

const Ops* avx2_ops_table() {
    static const Ops ops = {
        "avx2",    gemm_nn_avx2, gemm_nt_avx2, gemm_tn_avx2, vadd_avx2, vsub_avx2,
        vmul_avx2, axpy_avx2,    vscale_avx2,  dot_avx2,     vsum_avx2,
    };
    return &ops;
}

}  // namespace matr::kernels

#else

namespace matr::kernels {
const Ops* avx2_ops_table() { return nullptr; }
}  // namespace matr::kernels

#endif
