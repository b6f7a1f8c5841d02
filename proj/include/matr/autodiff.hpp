// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 matr contributors

#pragma once

#include <matr/tensor.hpp>

#include <functional>
#include <vector>

namespace matr::ad {

class Tape;

// Handle to a tape node; cheap to copy, valid while the tape lives.
class Var {
public:
    Var() = default;
    bool valid() const { return tape_ != nullptr; }
    int id() const { return id_; }
    Tape* tape() const { return tape_; }
    const Tensor& val() const;
    const Tensor& grad() const;  // zeros until backward touches the node
    int rows() const { return val().rows; }
    int cols() const { return val().cols; }

private:
    friend class Tape;
    Var(Tape* t, int id) : tape_(t), id_(id) {}
    Tape* tape_ = nullptr;
    int id_ = -1;
};

// Define-by-run reverse-mode tape over Tensors. Node values are immutable
// once emitted; backward walks nodes in reverse creation order.
class Tape {
public:
    struct Node {
        Tensor val;
        Tensor grad;
        bool needs_grad = false;
        bool grad_live = false;  // grad buffer has been touched
        std::function<void()> back;
    };

    Var leaf(Tensor value, bool needs_grad = false);
    Var emit(Tensor value, bool needs_grad, std::function<void()> back);

    void backward(Var loss);

    Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
    int size() const { return static_cast<int>(nodes_.size()); }

    // Zero-initialized on first access; backward closures accumulate into it.
    Tensor& grad_buffer(int id);
    void add_grad(int id, const Tensor& g);

private:
    std::vector<Node> nodes_;
};

// ---- primitive ops ---------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);            // elementwise
Var div(Var a, Var b);            // elementwise
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var add_rowvec(Var a, Var b);     // b is 1 x n, broadcast over rows
Var matmul(Var a, Var b);         // a (m x k) * b (k x n)
Var matmul_nt(Var a, Var b);      // a (m x k) * b^T, b stored (n x k)
Var slice_cols(Var a, int c0, int w);
Var slice_rows(Var a, int r0, int h);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var gather_rows(Var a, std::vector<int> idx);
Var softmax_rows(Var a);
Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);
Var gelu(Var a);
Var sigmoid(Var a);
Var lognat(Var a);
Var eabs(Var a);
Var emin(Var a, Var b);
Var emax(Var a, Var b);
Var sum_all(Var a);                                  // 1 x 1
Var select_cols_per_row(Var a, std::vector<int> idx);  // m x 1

// Sinusoidal embedding of box rows (m x 4) -> (m x dim); dim divisible by 8.
Var sin_embed(Var boxes, int dim, double temperature);

// 3x3 convolution with padding 1 over an image stored as (h*w) x c_in;
// weight is (c_in*9) x c_out with rows ordered (c_in, ky, kx); bias 1 x c_out.
// Output is (h/stride * w/stride) x c_out.
Var conv2d(Var x, Var w, Var b, int h, int width, int stride);

}  // namespace matr::ad
