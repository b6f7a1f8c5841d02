// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 matr contributors

#pragma once

#include <string>
#include <vector>

namespace matr::kernels {

// Dense row-major double-precision kernels. A scalar reference table always
// exists; vector tables (AVX2+FMA) are registered when the build and the CPU
// support them. The active table is picked once at startup and can be forced
// with MATR_KERNELS=scalar|avx2 or set_backend().
struct Ops {
    const char* name;

    // C (m x n) = A (m x k) * B (k x n); adds into C when accumulate.
    void (*gemm_nn)(const double* a, const double* b, double* c, int m, int k, int n,
                    bool accumulate);
    // C (m x n) = A (m x k) * B^T with B stored (n x k).
    void (*gemm_nt)(const double* a, const double* b, double* c, int m, int k, int n,
                    bool accumulate);
    // C (m x n) = A^T * B with A stored (k x m), B stored (k x n).
    void (*gemm_tn)(const double* a, const double* b, double* c, int m, int k, int n,
                    bool accumulate);

    void (*vadd)(const double* a, const double* b, double* out, int n);
    void (*vsub)(const double* a, const double* b, double* out, int n);
    void (*vmul)(const double* a, const double* b, double* out, int n);
    void (*axpy)(double alpha, const double* x, double* y, int n);
    void (*vscale)(const double* a, double alpha, double* out, int n);
    double (*dot)(const double* a, const double* b, int n);
    double (*vsum)(const double* a, int n);
};

const Ops& scalar_ops();

// nullptr when the build lacks the TU or the CPU lacks AVX2/FMA.
const Ops* avx2_ops();

const Ops& active();

// name: "auto", "scalar" or "avx2"; throws usage error otherwise.
void set_backend(const std::string& name);

std::vector<std::string> available_backends();

}  // namespace matr::kernels
