// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 matr contributors

#include <matr/autodiff.hpp>
#include <matr/geometry.hpp>
#include <matr/kernels.hpp>

#include <cmath>
#include <utility>

namespace matr::ad {

namespace {
const kernels::Ops& K() { return kernels::active(); }
}

const Tensor& Var::val() const { return tape_->node(id_).val; }
const Tensor& Var::grad() const {
    const Tape::Node& n = tape_->node(id_);
    MATR_CHECK(n.grad_live, "grad read before backward reached this node");
    return n.grad;
}

Var Tape::leaf(Tensor value, bool needs_grad) {
    return emit(std::move(value), needs_grad, nullptr);
}

Var Tape::emit(Tensor value, bool needs_grad, std::function<void()> back) {
    Node n;
    n.val = std::move(value);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor& Tape::grad_buffer(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.grad_live) {
        n.grad = Tensor(n.val.rows, n.val.cols);
        n.grad_live = true;
    }
    return n.grad;
}

void Tape::add_grad(int id, const Tensor& g) {
    Tensor& buf = grad_buffer(id);
    MATR_CHECK(buf.same_shape(g), "grad shape mismatch");
    K().vadd(buf.data(), g.data(), buf.data(), buf.size());
}

void Tape::backward(Var loss) {
    MATR_CHECK(loss.valid() && loss.tape() == this, "backward on foreign var");
    MATR_CHECK(node(loss.id()).val.size() == 1, "backward seed must be scalar");
    grad_buffer(loss.id()).v[0] = 1.0;
    for (int i = loss.id(); i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (n.needs_grad && n.grad_live && n.back) n.back();
    }
}

// ---- helpers ----------------------------------------------------------------

namespace {

bool ng(Var a) { return a.tape()->node(a.id()).needs_grad; }

Tape* same_tape(Var a, Var b) {
    MATR_CHECK(a.valid() && b.valid() && a.tape() == b.tape(), "vars on different tapes");
    return a.tape();
}

}  // namespace

// ---- elementwise ------------------------------------------------------------

Var add(Var a, Var b) {
    Tape* t = same_tape(a, b);
    MATR_CHECK(a.val().same_shape(b.val()), "add shape mismatch");
    Tensor out(a.rows(), a.cols());
    K().vadd(a.val().data(), b.val().data(), out.data(), out.size());
    bool g = ng(a) || ng(b);
    int ai = a.id(), bi = b.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, bi, ri] {
            const Tensor& gr = t->node(ri).grad;
            if (t->node(ai).needs_grad) t->add_grad(ai, gr);
            if (t->node(bi).needs_grad) t->add_grad(bi, gr);
        };
    }
    return r;
}

Var sub(Var a, Var b) {
    Tape* t = same_tape(a, b);
    MATR_CHECK(a.val().same_shape(b.val()), "sub shape mismatch");
    Tensor out(a.rows(), a.cols());
    K().vsub(a.val().data(), b.val().data(), out.data(), out.size());
    bool g = ng(a) || ng(b);
    int ai = a.id(), bi = b.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, bi, ri] {
            const Tensor& gr = t->node(ri).grad;
            if (t->node(ai).needs_grad) t->add_grad(ai, gr);
            if (t->node(bi).needs_grad)
                K().axpy(-1.0, gr.data(), t->grad_buffer(bi).data(), gr.size());
        };
    }
    return r;
}

Var mul(Var a, Var b) {
    Tape* t = same_tape(a, b);
    MATR_CHECK(a.val().same_shape(b.val()), "mul shape mismatch");
    Tensor out(a.rows(), a.cols());
    K().vmul(a.val().data(), b.val().data(), out.data(), out.size());
    bool g = ng(a) || ng(b);
    int ai = a.id(), bi = b.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, bi, ri] {
            const Tensor& gr = t->node(ri).grad;
            if (t->node(ai).needs_grad) {
                Tensor tmp(gr.rows, gr.cols);
                K().vmul(gr.data(), t->node(bi).val.data(), tmp.data(), tmp.size());
                t->add_grad(ai, tmp);
            }
            if (t->node(bi).needs_grad) {
                Tensor tmp(gr.rows, gr.cols);
                K().vmul(gr.data(), t->node(ai).val.data(), tmp.data(), tmp.size());
                t->add_grad(bi, tmp);
            }
        };
    }
    return r;
}

Var div(Var a, Var b) {
    Tape* t = same_tape(a, b);
    MATR_CHECK(a.val().same_shape(b.val()), "div shape mismatch");
    Tensor out(a.rows(), a.cols());
    for (int i = 0; i < out.size(); ++i) out.v[i] = a.val().v[i] / b.val().v[i];
    bool g = ng(a) || ng(b);
    int ai = a.id(), bi = b.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, bi, ri] {
            const Tensor& gr = t->node(ri).grad;
            const Tensor& bv = t->node(bi).val;
            const Tensor& ov = t->node(ri).val;
            if (t->node(ai).needs_grad) {
                Tensor& buf = t->grad_buffer(ai);
                for (int i = 0; i < gr.size(); ++i) buf.v[i] += gr.v[i] / bv.v[i];
            }
            if (t->node(bi).needs_grad) {
                Tensor& buf = t->grad_buffer(bi);
                for (int i = 0; i < gr.size(); ++i) buf.v[i] -= gr.v[i] * ov.v[i] / bv.v[i];
            }
        };
    }
    return r;
}

Var scale(Var a, double c) {
    Tape* t = a.tape();
    Tensor out(a.rows(), a.cols());
    K().vscale(a.val().data(), c, out.data(), out.size());
    bool g = ng(a);
    int ai = a.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, ri, c] {
            const Tensor& gr = t->node(ri).grad;
            K().axpy(c, gr.data(), t->grad_buffer(ai).data(), gr.size());
        };
    }
    return r;
}

Var add_scalar(Var a, double c) {
    Tape* t = a.tape();
    Tensor out = a.val();
    for (double& x : out.v) x += c;
    bool g = ng(a);
    int ai = a.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, ri] { t->add_grad(ai, t->node(ri).grad); };
    }
    return r;
}

Var add_rowvec(Var a, Var b) {
    Tape* t = same_tape(a, b);
    MATR_CHECK(b.rows() == 1 && b.cols() == a.cols(), "add_rowvec shape mismatch");
    Tensor out(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
        K().vadd(a.val().row(i), b.val().data(), out.row(i), a.cols());
    bool g = ng(a) || ng(b);
    int ai = a.id(), bi = b.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, bi, ri] {
            const Tensor& gr = t->node(ri).grad;
            if (t->node(ai).needs_grad) t->add_grad(ai, gr);
            if (t->node(bi).needs_grad) {
                Tensor& buf = t->grad_buffer(bi);
                for (int i = 0; i < gr.rows; ++i)
                    K().vadd(buf.data(), gr.row(i), buf.data(), gr.cols);
            }
        };
    }
    return r;
}

// ---- matmul -----------------------------------------------------------------

Var matmul(Var a, Var b) {
    Tape* t = same_tape(a, b);
    MATR_CHECK(a.cols() == b.rows(), "matmul shape mismatch");
    int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out(m, n);
    K().gemm_nn(a.val().data(), b.val().data(), out.data(), m, k, n, false);
    bool g = ng(a) || ng(b);
    int ai = a.id(), bi = b.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, bi, ri, m, k, n] {
            const Tensor& gr = t->node(ri).grad;
            if (t->node(ai).needs_grad)
                K().gemm_nt(gr.data(), t->node(bi).val.data(), t->grad_buffer(ai).data(), m, n, k,
                            true);
            if (t->node(bi).needs_grad)
                K().gemm_tn(t->node(ai).val.data(), gr.data(), t->grad_buffer(bi).data(), k, m, n,
                            true);
        };
    }
    return r;
}

Var matmul_nt(Var a, Var b) {
    Tape* t = same_tape(a, b);
    MATR_CHECK(a.cols() == b.cols(), "matmul_nt shape mismatch");
    int m = a.rows(), k = a.cols(), n = b.rows();
    Tensor out(m, n);
    K().gemm_nt(a.val().data(), b.val().data(), out.data(), m, k, n, false);
    bool g = ng(a) || ng(b);
    int ai = a.id(), bi = b.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, bi, ri, m, k, n] {
            const Tensor& gr = t->node(ri).grad;  // m x n
            if (t->node(ai).needs_grad)
                K().gemm_nn(gr.data(), t->node(bi).val.data(), t->grad_buffer(ai).data(), m, n, k,
                            true);
            if (t->node(bi).needs_grad)
                K().gemm_tn(gr.data(), t->node(ai).val.data(), t->grad_buffer(bi).data(), n, m, k,
                            true);
        };
    }
    return r;
}

// ---- slicing / concatenation -------------------------------------------------

Var slice_cols(Var a, int c0, int w) {
    Tape* t = a.tape();
    MATR_CHECK(c0 >= 0 && w > 0 && c0 + w <= a.cols(), "slice_cols out of range");
    Tensor out(a.rows(), w);
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < w; ++j) out.at(i, j) = a.val().at(i, c0 + j);
    bool g = ng(a);
    int ai = a.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, ri, c0, w] {
            const Tensor& gr = t->node(ri).grad;
            Tensor& buf = t->grad_buffer(ai);
            for (int i = 0; i < gr.rows; ++i)
                for (int j = 0; j < w; ++j) buf.at(i, c0 + j) += gr.at(i, j);
        };
    }
    return r;
}

Var slice_rows(Var a, int r0, int h) {
    Tape* t = a.tape();
    MATR_CHECK(r0 >= 0 && h > 0 && r0 + h <= a.rows(), "slice_rows out of range");
    Tensor out(h, a.cols());
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < a.cols(); ++j) out.at(i, j) = a.val().at(r0 + i, j);
    bool g = ng(a);
    int ai = a.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, ri, r0] {
            const Tensor& gr = t->node(ri).grad;
            Tensor& buf = t->grad_buffer(ai);
            for (int i = 0; i < gr.rows; ++i)
                K().vadd(buf.row(r0 + i), gr.row(i), buf.row(r0 + i), gr.cols);
        };
    }
    return r;
}

Var concat_cols(const std::vector<Var>& parts) {
    MATR_CHECK(!parts.empty(), "concat_cols of nothing");
    Tape* t = parts[0].tape();
    int rows = parts[0].rows(), cols = 0;
    bool g = false;
    for (const Var& p : parts) {
        MATR_CHECK(p.tape() == t && p.rows() == rows, "concat_cols mismatch");
        cols += p.cols();
        g = g || ng(p);
    }
    Tensor out(rows, cols);
    int off = 0;
    std::vector<int> ids, offs;
    for (const Var& p : parts) {
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < p.cols(); ++j) out.at(i, off + j) = p.val().at(i, j);
        ids.push_back(p.id());
        offs.push_back(off);
        off += p.cols();
    }
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ids, offs, ri] {
            const Tensor& gr = t->node(ri).grad;
            for (size_t k = 0; k < ids.size(); ++k) {
                if (!t->node(ids[k]).needs_grad) continue;
                Tensor& buf = t->grad_buffer(ids[k]);
                for (int i = 0; i < buf.rows; ++i)
                    for (int j = 0; j < buf.cols; ++j) buf.at(i, j) += gr.at(i, offs[k] + j);
            }
        };
    }
    return r;
}

Var concat_rows(const std::vector<Var>& parts) {
    MATR_CHECK(!parts.empty(), "concat_rows of nothing");
    Tape* t = parts[0].tape();
    int cols = parts[0].cols(), rows = 0;
    bool g = false;
    for (const Var& p : parts) {
        MATR_CHECK(p.tape() == t && p.cols() == cols, "concat_rows mismatch");
        rows += p.rows();
        g = g || ng(p);
    }
    Tensor out(rows, cols);
    int off = 0;
    std::vector<int> ids, offs;
    for (const Var& p : parts) {
        for (int i = 0; i < p.rows(); ++i)
            for (int j = 0; j < cols; ++j) out.at(off + i, j) = p.val().at(i, j);
        ids.push_back(p.id());
        offs.push_back(off);
        off += p.rows();
    }
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ids, offs, ri] {
            const Tensor& gr = t->node(ri).grad;
            for (size_t k = 0; k < ids.size(); ++k) {
                if (!t->node(ids[k]).needs_grad) continue;
                Tensor& buf = t->grad_buffer(ids[k]);
                for (int i = 0; i < buf.rows; ++i)
                    K().vadd(buf.row(i), gr.row(offs[k] + i), buf.row(i), buf.cols);
            }
        };
    }
    return r;
}

Var gather_rows(Var a, std::vector<int> idx) {
    Tape* t = a.tape();
    for (int i : idx) MATR_CHECK(i >= 0 && i < a.rows(), "gather_rows out of range");
    Tensor out(static_cast<int>(idx.size()), a.cols());
    for (size_t i = 0; i < idx.size(); ++i)
        for (int j = 0; j < a.cols(); ++j) out.at(static_cast<int>(i), j) = a.val().at(idx[i], j);
    bool g = ng(a);
    int ai = a.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, ri, idx = std::move(idx)] {
            const Tensor& gr = t->node(ri).grad;
            Tensor& buf = t->grad_buffer(ai);
            for (size_t i = 0; i < idx.size(); ++i)
                K().vadd(buf.row(idx[i]), gr.row(static_cast<int>(i)), buf.row(idx[i]), gr.cols);
        };
    }
    return r;
}

// ---- nonlinearities -----------------------------------------------------------

Var softmax_rows(Var a) {
    Tape* t = a.tape();
    Tensor out(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i) {
        const double* x = a.val().row(i);
        double mx = x[0];
        for (int j = 1; j < a.cols(); ++j) mx = std::max(mx, x[j]);
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) {
            out.at(i, j) = std::exp(x[j] - mx);
            s += out.at(i, j);
        }
        for (int j = 0; j < a.cols(); ++j) out.at(i, j) /= s;
    }
    bool g = ng(a);
    int ai = a.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, ri] {
            const Tensor& gr = t->node(ri).grad;
            const Tensor& ov = t->node(ri).val;
            Tensor& buf = t->grad_buffer(ai);
            for (int i = 0; i < gr.rows; ++i) {
                double gdoto = K().dot(gr.row(i), ov.row(i), gr.cols);
                for (int j = 0; j < gr.cols; ++j)
                    buf.at(i, j) += ov.at(i, j) * (gr.at(i, j) - gdoto);
            }
        };
    }
    return r;
}

Var layer_norm(Var a, Var gain, Var bias, double eps) {
    Tape* t = same_tape(a, gain);
    same_tape(gain, bias);
    int n = a.cols();
    MATR_CHECK(gain.rows() == 1 && gain.cols() == n && bias.rows() == 1 && bias.cols() == n,
               "layer_norm affine shape mismatch");
    Tensor out(a.rows(), n);
    Tensor xhat(a.rows(), n);
    std::vector<double> inv_std(static_cast<size_t>(a.rows()));
    for (int i = 0; i < a.rows(); ++i) {
        const double* x = a.val().row(i);
        double mean = K().vsum(x, n) / n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (x[j] - mean) * (x[j] - mean);
        var /= n;
        double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(i)] = is;
        for (int j = 0; j < n; ++j) {
            double xh = (x[j] - mean) * is;
            xhat.at(i, j) = xh;
            out.at(i, j) = gain.val().v[static_cast<size_t>(j)] * xh + bias.val().v[static_cast<size_t>(j)];
        }
    }
    bool g = ng(a) || ng(gain) || ng(bias);
    int ai = a.id(), gi = gain.id(), bi = bias.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, gi, bi, ri, xhat = std::move(xhat),
                            inv_std = std::move(inv_std)] {
            const Tensor& gr = t->node(ri).grad;
            int n = gr.cols;
            if (t->node(gi).needs_grad) {
                Tensor& gg = t->grad_buffer(gi);
                for (int i = 0; i < gr.rows; ++i)
                    for (int j = 0; j < n; ++j) gg.v[static_cast<size_t>(j)] += gr.at(i, j) * xhat.at(i, j);
            }
            if (t->node(bi).needs_grad) {
                Tensor& gb = t->grad_buffer(bi);
                for (int i = 0; i < gr.rows; ++i)
                    K().vadd(gb.data(), gr.row(i), gb.data(), n);
            }
            if (t->node(ai).needs_grad) {
                Tensor& ga = t->grad_buffer(ai);
                const Tensor& gv = t->node(gi).val;
                for (int i = 0; i < gr.rows; ++i) {
                    double mean_gh = 0.0, mean_ghx = 0.0;
                    for (int j = 0; j < n; ++j) {
                        double gh = gr.at(i, j) * gv.v[static_cast<size_t>(j)];
                        mean_gh += gh;
                        mean_ghx += gh * xhat.at(i, j);
                    }
                    mean_gh /= n;
                    mean_ghx /= n;
                    double is = inv_std[static_cast<size_t>(i)];
                    for (int j = 0; j < n; ++j) {
                        double gh = gr.at(i, j) * gv.v[static_cast<size_t>(j)];
                        ga.at(i, j) += is * (gh - mean_gh - xhat.at(i, j) * mean_ghx);
                    }
                }
            }
        };
    }
    return r;
}

Var gelu(Var a) {
    Tape* t = a.tape();
    Tensor out(a.rows(), a.cols());
    const double inv_sqrt2 = 0.70710678118654752440;
    for (int i = 0; i < out.size(); ++i) {
        double x = a.val().v[static_cast<size_t>(i)];
        out.v[static_cast<size_t>(i)] = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
    }
    bool g = ng(a);
    int ai = a.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, ri, inv_sqrt2] {
            const Tensor& gr = t->node(ri).grad;
            const Tensor& av = t->node(ai).val;
            Tensor& buf = t->grad_buffer(ai);
            const double inv_sqrt2pi = 0.39894228040143267794;
            for (int i = 0; i < gr.size(); ++i) {
                double x = av.v[static_cast<size_t>(i)];
                double phi = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                buf.v[static_cast<size_t>(i)] += gr.v[static_cast<size_t>(i)] * (phi + x * pdf);
            }
        };
    }
    return r;
}

Var sigmoid(Var a) {
    Tape* t = a.tape();
    Tensor out(a.rows(), a.cols());
    for (int i = 0; i < out.size(); ++i)
        out.v[static_cast<size_t>(i)] = 1.0 / (1.0 + std::exp(-a.val().v[static_cast<size_t>(i)]));
    bool g = ng(a);
    int ai = a.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, ri] {
            const Tensor& gr = t->node(ri).grad;
            const Tensor& ov = t->node(ri).val;
            Tensor& buf = t->grad_buffer(ai);
            for (int i = 0; i < gr.size(); ++i) {
                double s = ov.v[static_cast<size_t>(i)];
                buf.v[static_cast<size_t>(i)] += gr.v[static_cast<size_t>(i)] * s * (1.0 - s);
            }
        };
    }
    return r;
}

Var lognat(Var a) {
    Tape* t = a.tape();
    Tensor out(a.rows(), a.cols());
    for (int i = 0; i < out.size(); ++i) out.v[static_cast<size_t>(i)] = std::log(a.val().v[static_cast<size_t>(i)]);
    bool g = ng(a);
    int ai = a.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, ri] {
            const Tensor& gr = t->node(ri).grad;
            const Tensor& av = t->node(ai).val;
            Tensor& buf = t->grad_buffer(ai);
            for (int i = 0; i < gr.size(); ++i)
                buf.v[static_cast<size_t>(i)] += gr.v[static_cast<size_t>(i)] / av.v[static_cast<size_t>(i)];
        };
    }
    return r;
}

Var eabs(Var a) {
    Tape* t = a.tape();
    Tensor out(a.rows(), a.cols());
    for (int i = 0; i < out.size(); ++i) out.v[static_cast<size_t>(i)] = std::fabs(a.val().v[static_cast<size_t>(i)]);
    bool g = ng(a);
    int ai = a.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, ri] {
            const Tensor& gr = t->node(ri).grad;
            const Tensor& av = t->node(ai).val;
            Tensor& buf = t->grad_buffer(ai);
            for (int i = 0; i < gr.size(); ++i) {
                double x = av.v[static_cast<size_t>(i)];
                double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
                buf.v[static_cast<size_t>(i)] += gr.v[static_cast<size_t>(i)] * s;
            }
        };
    }
    return r;
}

namespace {

// shared by emin/emax; grad routed to the selected side, ties to a.
Var eminmax(Var a, Var b, bool take_min) {
    Tape* t = same_tape(a, b);
    MATR_CHECK(a.val().same_shape(b.val()), "emin/emax shape mismatch");
    Tensor out(a.rows(), a.cols());
    std::vector<unsigned char> pick_a(static_cast<size_t>(out.size()));
    for (int i = 0; i < out.size(); ++i) {
        double av = a.val().v[static_cast<size_t>(i)], bv = b.val().v[static_cast<size_t>(i)];
        bool sel_a = take_min ? (av <= bv) : (av >= bv);
        pick_a[static_cast<size_t>(i)] = sel_a;
        out.v[static_cast<size_t>(i)] = sel_a ? av : bv;
    }
    bool g = ng(a) || ng(b);
    int ai = a.id(), bi = b.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, bi, ri, pick_a = std::move(pick_a)] {
            const Tensor& gr = t->node(ri).grad;
            bool nga = t->node(ai).needs_grad, ngb = t->node(bi).needs_grad;
            Tensor* ga = nga ? &t->grad_buffer(ai) : nullptr;
            Tensor* gb = ngb ? &t->grad_buffer(bi) : nullptr;
            for (int i = 0; i < gr.size(); ++i) {
                if (pick_a[static_cast<size_t>(i)]) {
                    if (ga) ga->v[static_cast<size_t>(i)] += gr.v[static_cast<size_t>(i)];
                } else {
                    if (gb) gb->v[static_cast<size_t>(i)] += gr.v[static_cast<size_t>(i)];
                }
            }
        };
    }
    return r;
}

}  // namespace

Var emin(Var a, Var b) { return eminmax(a, b, true); }
Var emax(Var a, Var b) { return eminmax(a, b, false); }

Var sum_all(Var a) {
    Tape* t = a.tape();
    Tensor out(1, 1);
    out.v[0] = K().vsum(a.val().data(), a.val().size());
    bool g = ng(a);
    int ai = a.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, ri] {
            double gv = t->node(ri).grad.v[0];
            Tensor& buf = t->grad_buffer(ai);
            for (double& x : buf.v) x += gv;
        };
    }
    return r;
}

Var select_cols_per_row(Var a, std::vector<int> idx) {
    Tape* t = a.tape();
    MATR_CHECK(static_cast<int>(idx.size()) == a.rows(), "select_cols_per_row size mismatch");
    for (int j : idx) MATR_CHECK(j >= 0 && j < a.cols(), "select_cols_per_row out of range");
    Tensor out(a.rows(), 1);
    for (int i = 0; i < a.rows(); ++i) out.at(i, 0) = a.val().at(i, idx[static_cast<size_t>(i)]);
    bool g = ng(a);
    int ai = a.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, ri, idx = std::move(idx)] {
            const Tensor& gr = t->node(ri).grad;
            Tensor& buf = t->grad_buffer(ai);
            for (int i = 0; i < gr.rows; ++i) buf.at(i, idx[static_cast<size_t>(i)]) += gr.at(i, 0);
        };
    }
    return r;
}

Var sin_embed(Var boxes, int dim, double temperature) {
    Tape* t = boxes.tape();
    MATR_CHECK(boxes.cols() == 4, "sin_embed expects m x 4 boxes");
    MATR_CHECK(dim > 0 && dim % 8 == 0, "sin_embed dim must be a multiple of 8");
    int per_coord = dim / 4;
    Tensor out(boxes.rows(), dim);
    for (int i = 0; i < boxes.rows(); ++i)
        for (int c = 0; c < 4; ++c)
            sinusoid_features(boxes.val().at(i, c), per_coord, temperature,
                              out.row(i) + c * per_coord);
    bool g = ng(boxes);
    int ai = boxes.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        t->node(ri).back = [t, ai, ri, per_coord, temperature] {
            const Tensor& gr = t->node(ri).grad;
            const Tensor& ov = t->node(ri).val;
            Tensor& buf = t->grad_buffer(ai);
            int pairs = per_coord / 2;
            for (int i = 0; i < gr.rows; ++i) {
                for (int c = 0; c < 4; ++c) {
                    double acc = 0.0;
                    const double* gout = gr.row(i) + c * per_coord;
                    const double* vout = ov.row(i) + c * per_coord;
                    for (int j = 0; j < pairs; ++j) {
                        double omega = sinusoid_omega(j, pairs, temperature);
                        // d/dx sin = omega*cos, d/dx cos = -omega*sin
                        acc += omega * (gout[2 * j] * vout[2 * j + 1] -
                                        gout[2 * j + 1] * vout[2 * j]);
                    }
                    buf.at(i, c) += acc;
                }
            }
        };
    }
    return r;
}

// ---- convolution ---------------------------------------------------------------

namespace {

// patch matrix rows: output pixels in row-major order; columns (c_in, ky, kx).
Tensor im2col(const Tensor& x, int h, int w, int stride) {
    int cin = x.cols;
    int ho = (h + 2 - 3) / stride + 1;
    int wo = (w + 2 - 3) / stride + 1;
    Tensor p(ho * wo, cin * 9);
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            double* prow = p.row(oy * wo + ox);
            for (int c = 0; c < cin; ++c) {
                for (int ky = 0; ky < 3; ++ky) {
                    int iy = oy * stride + ky - 1;
                    for (int kx = 0; kx < 3; ++kx) {
                        int ix = ox * stride + kx - 1;
                        double v = 0.0;
                        if (iy >= 0 && iy < h && ix >= 0 && ix < w) v = x.at(iy * w + ix, c);
                        prow[c * 9 + ky * 3 + kx] = v;
                    }
                }
            }
        }
    }
    return p;
}

}  // namespace

Var conv2d(Var x, Var w, Var b, int h, int width, int stride) {
    Tape* t = same_tape(x, w);
    same_tape(w, b);
    int cin = x.cols();
    MATR_CHECK(x.rows() == h * width, "conv2d input shape mismatch");
    MATR_CHECK(w.rows() == cin * 9, "conv2d weight shape mismatch");
    MATR_CHECK(b.rows() == 1 && b.cols() == w.cols(), "conv2d bias shape mismatch");
    int cout = w.cols();
    Tensor patches = im2col(x.val(), h, width, stride);
    int npix = patches.rows;
    Tensor out(npix, cout);
    K().gemm_nn(patches.data(), w.val().data(), out.data(), npix, cin * 9, cout, false);
    for (int i = 0; i < npix; ++i) K().vadd(out.row(i), b.val().data(), out.row(i), cout);
    bool g = ng(x) || ng(w) || ng(b);
    int xi = x.id(), wi = w.id(), bi = b.id();
    Var r = t->emit(std::move(out), g, nullptr);
    if (g) {
        int ri = r.id();
        int ho = (h + 2 - 3) / stride + 1;
        int wo = (width + 2 - 3) / stride + 1;
        t->node(ri).back = [t, xi, wi, bi, ri, patches = std::move(patches), h, width, stride, cin,
                            cout, ho, wo] {
            const Tensor& gr = t->node(ri).grad;  // npix x cout
            int npix = gr.rows;
            if (t->node(wi).needs_grad)
                K().gemm_tn(patches.data(), gr.data(), t->grad_buffer(wi).data(), cin * 9, npix,
                            cout, true);
            if (t->node(bi).needs_grad) {
                Tensor& gb = t->grad_buffer(bi);
                for (int i = 0; i < npix; ++i) K().vadd(gb.data(), gr.row(i), gb.data(), cout);
            }
            if (t->node(xi).needs_grad) {
                Tensor gp(npix, cin * 9);
                K().gemm_nt(gr.data(), t->node(wi).val.data(), gp.data(), npix, cout, cin * 9,
                            true);
                Tensor& gx = t->grad_buffer(xi);
                for (int oy = 0; oy < ho; ++oy) {
                    for (int ox = 0; ox < wo; ++ox) {
                        const double* prow = gp.row(oy * wo + ox);
                        for (int c = 0; c < cin; ++c) {
                            for (int ky = 0; ky < 3; ++ky) {
                                int iy = oy * stride + ky - 1;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < 3; ++kx) {
                                    int ix = ox * stride + kx - 1;
                                    if (ix < 0 || ix >= width) continue;
                                    gx.at(iy * width + ix, c) += prow[c * 9 + ky * 3 + kx];
                                }
                            }
                        }
                    }
                }
            }
        };
    }
    return r;
}

}  // namespace matr::ad
