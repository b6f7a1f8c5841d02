// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 matr contributors

#pragma once

#include <matr/common.hpp>

#include <cmath>
#include <initializer_list>
#include <vector>

namespace matr {

// Dense row-major 2-D double matrix. Vectors are 1xN or Nx1, scalars 1x1.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0)
        : rows(r), cols(c), v(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
        MATR_CHECK(r >= 0 && c >= 0, "negative tensor shape");
    }

    static Tensor from(std::initializer_list<std::initializer_list<double>> rows_in) {
        int r = static_cast<int>(rows_in.size());
        int c = r ? static_cast<int>(rows_in.begin()->size()) : 0;
        Tensor t(r, c);
        int i = 0;
        for (const auto& row : rows_in) {
            MATR_CHECK(static_cast<int>(row.size()) == c, "ragged initializer");
            int j = 0;
            for (double x : row) t.at(i, j++) = x;
            ++i;
        }
        return t;
    }

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }
    double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }

    int size() const { return rows * cols; }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::fabs(x));
        return m;
    }
};

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.rows, t.cols); }

}  // namespace matr
