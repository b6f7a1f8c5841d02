// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 matr contributors
//
// Reference kernels. Plain loops, fixed summation order; the vector backends
// are equivalence-tested against these.

#include <matr/kernels.hpp>

namespace matr::kernels {
namespace {

void gemm_nn_scalar(const double* a, const double* b, double* c, int m, int k, int n,
                    bool accumulate) {
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<long>(i) * n;
        if (!accumulate)
            for (int j = 0; j < n; ++j) crow[j] = 0.0;
        const double* arow = a + static_cast<long>(i) * k;
        for (int p = 0; p < k; ++p) {
            double av = arow[p];
            const double* brow = b + static_cast<long>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt_scalar(const double* a, const double* b, double* c, int m, int k, int n,
                    bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<long>(i) * k;
        double* crow = c + static_cast<long>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<long>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + s : s;
        }
    }
}

void gemm_tn_scalar(const double* a, const double* b, double* c, int m, int k, int n,
                    bool accumulate) {
    if (!accumulate)
        for (long i = 0; i < static_cast<long>(m) * n; ++i) c[i] = 0.0;
    for (int p = 0; p < k; ++p) {
        const double* arow = a + static_cast<long>(p) * m;
        const double* brow = b + static_cast<long>(p) * n;
        for (int i = 0; i < m; ++i) {
            double av = arow[i];
            double* crow = c + static_cast<long>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void vadd_scalar(const double* a, const double* b, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void vsub_scalar(const double* a, const double* b, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void vmul_scalar(const double* a, const double* b, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy_scalar(double alpha, const double* x, double* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void vscale_scalar(const double* a, double alpha, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] * alpha;
}

double dot_scalar(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double vsum_scalar(const double* a, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i];
    return s;
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops = {
        "scalar",      gemm_nn_scalar, gemm_nt_scalar, gemm_tn_scalar, vadd_scalar, vsub_scalar,
        vmul_scalar,   axpy_scalar,    vscale_scalar,  dot_scalar,     vsum_scalar,
    };
    return ops;
}

}  // namespace matr::kernels
