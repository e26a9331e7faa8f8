#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fmrigen/ad/graph.hpp"

// Op library for the reverse-mode graph. Vectors that flow through the
// models are kept 2-D ([1, n] rows) so linear/matmul/concat compose without
// special cases. Convolutions run on [N, C, D, H, W] activations.
namespace fmrigen::ad {

template <class S>
inline Tensor<S>& gof(const Var<S>& p) {
    return p->ensure_grad();
}

template <class S>
inline void check_same_shape(const Var<S>& a, const Var<S>& b, const char* op) {
    if (!a->val.same_shape(b->val))
        throw ValidationError(std::string(op) + ": shape mismatch " + a->val.shape_str() + " vs " +
                              b->val.shape_str());
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <class S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
    check_same_shape(a, b, "add");
    Tensor<S> out = a->val;
    for (int64_t i = 0; i < out.size(); ++i) out.v[i] += b->val.v[i];
    return make_node<S>(std::move(out), {a, b}, [](Node<S>& n) {
        for (int p = 0; p < 2; ++p) {
            if (!n.parents[p]->requires_grad) continue;
            Tensor<S>& g = gof(n.parents[p]);
            for (int64_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i];
        }
    });
}

template <class S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
    check_same_shape(a, b, "sub");
    Tensor<S> out = a->val;
    for (int64_t i = 0; i < out.size(); ++i) out.v[i] -= b->val.v[i];
    return make_node<S>(std::move(out), {a, b}, [](Node<S>& n) {
        if (n.parents[0]->requires_grad) {
            Tensor<S>& g = gof(n.parents[0]);
            for (int64_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i];
        }
        if (n.parents[1]->requires_grad) {
            Tensor<S>& g = gof(n.parents[1]);
            for (int64_t i = 0; i < g.size(); ++i) g.v[i] -= n.grad.v[i];
        }
    });
}

template <class S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
    check_same_shape(a, b, "mul");
    Tensor<S> out = a->val;
    for (int64_t i = 0; i < out.size(); ++i) out.v[i] *= b->val.v[i];
    return make_node<S>(std::move(out), {a, b}, [](Node<S>& n) {
        const Tensor<S>& av = n.parents[0]->val;
        const Tensor<S>& bv = n.parents[1]->val;
        if (n.parents[0]->requires_grad) {
            Tensor<S>& g = gof(n.parents[0]);
            for (int64_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i] * bv.v[i];
        }
        if (n.parents[1]->requires_grad) {
            Tensor<S>& g = gof(n.parents[1]);
            for (int64_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i] * av.v[i];
        }
    });
}

// alpha * x + beta, elementwise
template <class S>
Var<S> affine(const Var<S>& x, double alpha, double beta) {
    Tensor<S> out = x->val;
    for (auto& e : out.v) e = static_cast<S>(alpha * e + beta);
    return make_node<S>(std::move(out), {x}, [alpha](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        for (int64_t i = 0; i < g.size(); ++i) g.v[i] += static_cast<S>(alpha) * n.grad.v[i];
    });
}

template <class S>
Var<S> scale(const Var<S>& x, double alpha) {
    return affine(x, alpha, 0.0);
}

template <class S>
Var<S> leaky_relu(const Var<S>& x, double slope = 0.2) {
    Tensor<S> out = x->val;
    const S a = static_cast<S>(slope);
    for (auto& e : out.v) e = e > S(0) ? e : a * e;
    return make_node<S>(std::move(out), {x}, [a](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        const Tensor<S>& xv = n.parents[0]->val;
        for (int64_t i = 0; i < g.size(); ++i)
            g.v[i] += n.grad.v[i] * (xv.v[i] > S(0) ? S(1) : a);
    });
}

template <class S>
Var<S> tanh_op(const Var<S>& x) {
    Tensor<S> out = x->val;
    for (auto& e : out.v) e = std::tanh(e);
    return make_node<S>(std::move(out), {x}, [](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        for (int64_t i = 0; i < g.size(); ++i) {
            const S y = n.val.v[i];
            g.v[i] += n.grad.v[i] * (S(1) - y * y);
        }
    });
}

template <class S>
Var<S> sigmoid_op(const Var<S>& x) {
    Tensor<S> out = x->val;
    for (auto& e : out.v) {
        if (e >= S(0)) {
            e = S(1) / (S(1) + std::exp(-e));
        } else {
            const S z = std::exp(e);
            e = z / (S(1) + z);
        }
    }
    return make_node<S>(std::move(out), {x}, [](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        for (int64_t i = 0; i < g.size(); ++i) {
            const S y = n.val.v[i];
            g.v[i] += n.grad.v[i] * y * (S(1) - y);
        }
    });
}

template <class S>
Var<S> log_op(const Var<S>& x) {
    Tensor<S> out = x->val;
    for (auto& e : out.v) e = std::log(e);
    return make_node<S>(std::move(out), {x}, [](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        const Tensor<S>& xv = n.parents[0]->val;
        for (int64_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i] / xv.v[i];
    });
}

template <class S>
Var<S> abs_op(const Var<S>& x) {
    Tensor<S> out = x->val;
    for (auto& e : out.v) e = std::abs(e);
    return make_node<S>(std::move(out), {x}, [](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        const Tensor<S>& xv = n.parents[0]->val;
        for (int64_t i = 0; i < g.size(); ++i) {
            const S s = xv.v[i] > S(0) ? S(1) : (xv.v[i] < S(0) ? S(-1) : S(0));
            g.v[i] += n.grad.v[i] * s;
        }
    });
}

// Gradient passes through only where the value was not clipped.
template <class S>
Var<S> clamp_op(const Var<S>& x, double lo, double hi) {
    Tensor<S> out = x->val;
    const S l = static_cast<S>(lo), h = static_cast<S>(hi);
    for (auto& e : out.v) e = std::min(h, std::max(l, e));
    return make_node<S>(std::move(out), {x}, [l, h](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        const Tensor<S>& xv = n.parents[0]->val;
        for (int64_t i = 0; i < g.size(); ++i)
            if (xv.v[i] > l && xv.v[i] < h) g.v[i] += n.grad.v[i];
    });
}

// Numeric guard for log arguments: values are clipped but the gradient is the
// identity, so a saturated probability keeps pulling instead of going dead.
template <class S>
Var<S> clamp_passthrough(const Var<S>& x, double lo, double hi) {
    Tensor<S> out = x->val;
    const S l = static_cast<S>(lo), h = static_cast<S>(hi);
    for (auto& e : out.v) e = std::min(h, std::max(l, e));
    return make_node<S>(std::move(out), {x}, [](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        for (int64_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i];
    });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <class S>
Var<S> sum_all(const Var<S>& x) {
    double acc = 0;
    for (const auto& e : x->val.v) acc += e;
    return make_node<S>(Tensor<S>::scalar(static_cast<S>(acc)), {x}, [](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        const S gv = n.grad.v[0];
        for (int64_t i = 0; i < g.size(); ++i) g.v[i] += gv;
    });
}

template <class S>
Var<S> mean_all(const Var<S>& x) {
    const int64_t m = x->val.size();
    double acc = 0;
    for (const auto& e : x->val.v) acc += e;
    acc /= static_cast<double>(m);
    return make_node<S>(Tensor<S>::scalar(static_cast<S>(acc)), {x}, [m](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        const S gv = n.grad.v[0] / static_cast<S>(m);
        for (int64_t i = 0; i < g.size(); ++i) g.v[i] += gv;
    });
}

// [n, m] -> [1, m], average over rows
template <class S>
Var<S> mean_over_rows(const Var<S>& x) {
    if (x->val.shape.size() != 2) throw ValidationError("mean_over_rows: expects [n, m]");
    const int rows = x->val.dim(0), cols = x->val.dim(1);
    Tensor<S> out({1, cols});
    for (int j = 0; j < cols; ++j) {
        double acc = 0;
        for (int i = 0; i < rows; ++i) acc += x->val.v[static_cast<size_t>(i) * cols + j];
        out.v[j] = static_cast<S>(acc / rows);
    }
    return make_node<S>(std::move(out), {x}, [rows, cols](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                g.v[static_cast<size_t>(i) * cols + j] += n.grad.v[j] / static_cast<S>(rows);
    });
}

// ---------------------------------------------------------------------------
// structure
// ---------------------------------------------------------------------------

template <class S>
Var<S> reshape(const Var<S>& x, std::vector<int> shape) {
    if (Tensor<S>::count(shape) != x->val.size())
        throw ValidationError("reshape: element count mismatch");
    Tensor<S> out(std::move(shape), x->val.v);
    return make_node<S>(std::move(out), {x}, [](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        for (int64_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i];
    });
}

template <class S>
Var<S> slice_rows(const Var<S>& x, int r0, int rows) {
    const int cols = x->val.dim(1);
    if (r0 < 0 || r0 + rows > x->val.dim(0)) throw ValidationError("slice_rows: out of range");
    Tensor<S> out({rows, cols});
    std::copy_n(x->val.data() + static_cast<size_t>(r0) * cols, static_cast<size_t>(rows) * cols,
                out.data());
    return make_node<S>(std::move(out), {x}, [r0, rows, cols](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        for (int64_t i = 0; i < static_cast<int64_t>(rows) * cols; ++i)
            g.v[static_cast<size_t>(r0) * cols + i] += n.grad.v[i];
    });
}

template <class S>
Var<S> slice_cols(const Var<S>& x, int c0, int cols) {
    const int rows = x->val.dim(0), all = x->val.dim(1);
    if (c0 < 0 || c0 + cols > all) throw ValidationError("slice_cols: out of range");
    Tensor<S> out({rows, cols});
    for (int i = 0; i < rows; ++i)
        std::copy_n(x->val.data() + static_cast<size_t>(i) * all + c0, cols,
                    out.data() + static_cast<size_t>(i) * cols);
    return make_node<S>(std::move(out), {x}, [c0, cols, all, rows](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                g.v[static_cast<size_t>(i) * all + c0 + j] +=
                    n.grad.v[static_cast<size_t>(i) * cols + j];
    });
}

template <class S>
Var<S> concat_cols(const Var<S>& a, const Var<S>& b) {
    if (a->val.dim(0) != b->val.dim(0)) throw ValidationError("concat_cols: row mismatch");
    const int rows = a->val.dim(0), ca = a->val.dim(1), cb = b->val.dim(1);
    Tensor<S> out({rows, ca + cb});
    for (int i = 0; i < rows; ++i) {
        std::copy_n(a->val.data() + static_cast<size_t>(i) * ca, ca,
                    out.data() + static_cast<size_t>(i) * (ca + cb));
        std::copy_n(b->val.data() + static_cast<size_t>(i) * cb, cb,
                    out.data() + static_cast<size_t>(i) * (ca + cb) + ca);
    }
    return make_node<S>(std::move(out), {a, b}, [rows, ca, cb](Node<S>& n) {
        for (int i = 0; i < rows; ++i) {
            if (n.parents[0]->requires_grad) {
                Tensor<S>& g = gof(n.parents[0]);
                for (int j = 0; j < ca; ++j)
                    g.v[static_cast<size_t>(i) * ca + j] +=
                        n.grad.v[static_cast<size_t>(i) * (ca + cb) + j];
            }
            if (n.parents[1]->requires_grad) {
                Tensor<S>& g = gof(n.parents[1]);
                for (int j = 0; j < cb; ++j)
                    g.v[static_cast<size_t>(i) * cb + j] +=
                        n.grad.v[static_cast<size_t>(i) * (ca + cb) + ca + j];
            }
        }
    });
}

// Stack [1, m] rows into [k, m].
template <class S>
Var<S> concat_rows(const std::vector<Var<S>>& rows) {
    if (rows.empty()) throw ValidationError("concat_rows: empty input");
    const int cols = rows[0]->val.dim(1);
    int total = 0;
    for (const auto& r : rows) {
        if (r->val.dim(1) != cols) throw ValidationError("concat_rows: column mismatch");
        total += r->val.dim(0);
    }
    Tensor<S> out({total, cols});
    int at = 0;
    for (const auto& r : rows) {
        std::copy_n(r->val.data(), r->val.size(), out.data() + static_cast<size_t>(at) * cols);
        at += r->val.dim(0);
    }
    return make_node<S>(std::move(out), rows, [cols](Node<S>& n) {
        int at = 0;
        for (auto& p : n.parents) {
            const int pr = p->val.dim(0);
            if (p->requires_grad) {
                Tensor<S>& g = gof(p);
                for (int64_t i = 0; i < static_cast<int64_t>(pr) * cols; ++i)
                    g.v[i] += n.grad.v[static_cast<size_t>(at) * cols + i];
            }
            at += pr;
        }
    });
}

// [1, m] -> [n, m]
template <class S>
Var<S> broadcast_row(const Var<S>& v, int n) {
    if (v->val.dim(0) != 1) throw ValidationError("broadcast_row: expects a [1, m] row");
    const int cols = v->val.dim(1);
    Tensor<S> out({n, cols});
    for (int i = 0; i < n; ++i) std::copy_n(v->val.data(), cols, out.data() + static_cast<size_t>(i) * cols);
    return make_node<S>(std::move(out), {v}, [n, cols](Node<S>& nn) {
        Tensor<S>& g = gof(nn.parents[0]);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < cols; ++j) g.v[j] += nn.grad.v[static_cast<size_t>(i) * cols + j];
    });
}

template <class S>
Var<S> reverse_rows(const Var<S>& x) {
    const int rows = x->val.dim(0), cols = x->val.dim(1);
    Tensor<S> out({rows, cols});
    for (int i = 0; i < rows; ++i)
        std::copy_n(x->val.data() + static_cast<size_t>(i) * cols, cols,
                    out.data() + static_cast<size_t>(rows - 1 - i) * cols);
    return make_node<S>(std::move(out), {x}, [rows, cols](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                g.v[static_cast<size_t>(i) * cols + j] +=
                    n.grad.v[static_cast<size_t>(rows - 1 - i) * cols + j];
    });
}

// ---------------------------------------------------------------------------
// matrix products
// ---------------------------------------------------------------------------

template <class S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
    if (a->val.shape.size() != 2 || b->val.shape.size() != 2)
        throw ValidationError("matmul: expects 2-D operands");
    const int n = a->val.dim(0), k = a->val.dim(1);
    if (b->val.dim(0) != k)
        throw ValidationError("matmul: inner dims " + a->val.shape_str() + " x " + b->val.shape_str());
    const int m = b->val.dim(1);
    Tensor<S> out({n, m});
    const S* A = a->val.data();
    const S* B = b->val.data();
    S* C = out.data();
    for (int i = 0; i < n; ++i) {
        for (int kk = 0; kk < k; ++kk) {
            const S av = A[static_cast<size_t>(i) * k + kk];
            if (av == S(0)) continue;
            const S* brow = B + static_cast<size_t>(kk) * m;
            S* crow = C + static_cast<size_t>(i) * m;
            for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
    return make_node<S>(std::move(out), {a, b}, [n, k, m](Node<S>& node) {
        const S* A = node.parents[0]->val.data();
        const S* B = node.parents[1]->val.data();
        const S* G = node.grad.data();
        if (node.parents[0]->requires_grad) {
            S* dA = gof(node.parents[0]).data();
            for (int i = 0; i < n; ++i)
                for (int kk = 0; kk < k; ++kk) {
                    double acc = 0;
                    const S* grow = G + static_cast<size_t>(i) * m;
                    const S* brow = B + static_cast<size_t>(kk) * m;
                    for (int j = 0; j < m; ++j) acc += static_cast<double>(grow[j]) * brow[j];
                    dA[static_cast<size_t>(i) * k + kk] += static_cast<S>(acc);
                }
        }
        if (node.parents[1]->requires_grad) {
            S* dB = gof(node.parents[1]).data();
            for (int i = 0; i < n; ++i)
                for (int kk = 0; kk < k; ++kk) {
                    const S av = A[static_cast<size_t>(i) * k + kk];
                    if (av == S(0)) continue;
                    const S* grow = G + static_cast<size_t>(i) * m;
                    S* drow = dB + static_cast<size_t>(kk) * m;
                    for (int j = 0; j < m; ++j) drow[j] += av * grow[j];
                }
        }
    });
}

// A [n, k] times B^T where B is [m, k]
template <class S>
Var<S> matmul_nt(const Var<S>& a, const Var<S>& b) {
    const int n = a->val.dim(0), k = a->val.dim(1), m = b->val.dim(0);
    if (b->val.dim(1) != k) throw ValidationError("matmul_nt: inner dims mismatch");
    Tensor<S> out({n, m});
    const S* A = a->val.data();
    const S* B = b->val.data();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double acc = 0;
            const S* ar = A + static_cast<size_t>(i) * k;
            const S* br = B + static_cast<size_t>(j) * k;
            for (int kk = 0; kk < k; ++kk) acc += static_cast<double>(ar[kk]) * br[kk];
            out.v[static_cast<size_t>(i) * m + j] = static_cast<S>(acc);
        }
    return make_node<S>(std::move(out), {a, b}, [n, k, m](Node<S>& node) {
        const S* A = node.parents[0]->val.data();
        const S* B = node.parents[1]->val.data();
        const S* G = node.grad.data();
        if (node.parents[0]->requires_grad) {
            S* dA = gof(node.parents[0]).data();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) {
                    const S gv = G[static_cast<size_t>(i) * m + j];
                    if (gv == S(0)) continue;
                    const S* br = B + static_cast<size_t>(j) * k;
                    S* dr = dA + static_cast<size_t>(i) * k;
                    for (int kk = 0; kk < k; ++kk) dr[kk] += gv * br[kk];
                }
        }
        if (node.parents[1]->requires_grad) {
            S* dB = gof(node.parents[1]).data();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) {
                    const S gv = G[static_cast<size_t>(i) * m + j];
                    if (gv == S(0)) continue;
                    const S* ar = A + static_cast<size_t>(i) * k;
                    S* dr = dB + static_cast<size_t>(j) * k;
                    for (int kk = 0; kk < k; ++kk) dr[kk] += gv * ar[kk];
                }
        }
    });
}

// X [n, m] + b (row vector [1, m])
template <class S>
Var<S> add_rowvec(const Var<S>& x, const Var<S>& b) {
    const int rows = x->val.dim(0), cols = x->val.dim(1);
    if (b->val.size() != cols) throw ValidationError("add_rowvec: width mismatch");
    Tensor<S> out = x->val;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out.v[static_cast<size_t>(i) * cols + j] += b->val.v[j];
    return make_node<S>(std::move(out), {x, b}, [rows, cols](Node<S>& n) {
        if (n.parents[0]->requires_grad) {
            Tensor<S>& g = gof(n.parents[0]);
            for (int64_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i];
        }
        if (n.parents[1]->requires_grad) {
            Tensor<S>& g = gof(n.parents[1]);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) g.v[j] += n.grad.v[static_cast<size_t>(i) * cols + j];
        }
    });
}

template <class S>
Var<S> linear(const Var<S>& x, const Var<S>& w, const Var<S>& b) {
    return add_rowvec(matmul(x, w), b);
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

template <class S>
Var<S> softmax_rows(const Var<S>& x) {
    const int rows = x->val.dim(0), cols = x->val.dim(1);
    Tensor<S> out({rows, cols});
    for (int i = 0; i < rows; ++i) {
        const S* xr = x->val.data() + static_cast<size_t>(i) * cols;
        S* yr = out.data() + static_cast<size_t>(i) * cols;
        S mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        double sum = 0;
        for (int j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        for (int j = 0; j < cols; ++j) yr[j] = static_cast<S>(yr[j] / sum);
    }
    return make_node<S>(std::move(out), {x}, [rows, cols](Node<S>& n) {
        Tensor<S>& g = gof(n.parents[0]);
        for (int i = 0; i < rows; ++i) {
            const S* yr = n.val.data() + static_cast<size_t>(i) * cols;
            const S* gr = n.grad.data() + static_cast<size_t>(i) * cols;
            double dot = 0;
            for (int j = 0; j < cols; ++j) dot += static_cast<double>(gr[j]) * yr[j];
            S* out = g.data() + static_cast<size_t>(i) * cols;
            for (int j = 0; j < cols; ++j)
                out[j] += yr[j] * (gr[j] - static_cast<S>(dot));
        }
    });
}

// ---------------------------------------------------------------------------
// 3-D convolution family; activations are [N, C, D, H, W]
// ---------------------------------------------------------------------------

struct ConvGeom {
    int n, ci, d, h, w;
    int co, k, s, p;
    int od, oh, ow;
};

// floor((in + 2p - k)/s) + 1; true floor so undersized inputs go negative
// instead of truncating toward zero.
inline int conv_len(int in, int k, int s, int p) {
    const int num = in + 2 * p - k;
    const int q = num >= 0 ? num / s : -((-num + s - 1) / s);
    return q + 1;
}

template <class S>
ConvGeom conv3d_geom(const Tensor<S>& x, const Tensor<S>& w, int stride, int pad) {
    if (x.shape.size() != 5) throw ValidationError("conv3d: input must be [N,C,D,H,W]");
    if (w.shape.size() != 5) throw ValidationError("conv3d: weight must be [Co,Ci,k,k,k]");
    ConvGeom g{};
    g.n = x.dim(0); g.ci = x.dim(1); g.d = x.dim(2); g.h = x.dim(3); g.w = x.dim(4);
    g.co = w.dim(0); g.k = w.dim(2); g.s = stride; g.p = pad;
    if (w.dim(1) != g.ci) throw ValidationError("conv3d: channel mismatch");
    g.od = conv_len(g.d, g.k, g.s, g.p);
    g.oh = conv_len(g.h, g.k, g.s, g.p);
    g.ow = conv_len(g.w, g.k, g.s, g.p);
    if (g.od < 1 || g.oh < 1 || g.ow < 1)
        throw ValidationError("conv3d: non-positive output size for input " + x.shape_str());
    return g;
}

template <class S>
Var<S> conv3d(const Var<S>& x, const Var<S>& w, const Var<S>& b, int stride, int pad) {
    const ConvGeom g = conv3d_geom(x->val, w->val, stride, pad);
    if (b->val.size() != g.co) throw ValidationError("conv3d: bias size mismatch");

    Tensor<S> out({g.n, g.co, g.od, g.oh, g.ow});
    const S* X = x->val.data();
    const S* W = w->val.data();
    const S* B = b->val.data();
    S* Y = out.data();
    const int64_t xc = static_cast<int64_t>(g.d) * g.h * g.w;
    const int64_t xn = xc * g.ci;
    const int64_t wc = static_cast<int64_t>(g.k) * g.k * g.k;
    const int64_t wo = wc * g.ci;
    int64_t yi = 0;
    for (int n = 0; n < g.n; ++n)
        for (int co = 0; co < g.co; ++co)
            for (int od = 0; od < g.od; ++od) {
                const int id0 = od * g.s - g.p;
                const int kd0 = std::max(0, -id0), kd1 = std::min(g.k, g.d - id0);
                for (int oh = 0; oh < g.oh; ++oh) {
                    const int ih0 = oh * g.s - g.p;
                    const int kh0 = std::max(0, -ih0), kh1 = std::min(g.k, g.h - ih0);
                    for (int ow = 0; ow < g.ow; ++ow, ++yi) {
                        const int iw0 = ow * g.s - g.p;
                        const int kw0 = std::max(0, -iw0), kw1 = std::min(g.k, g.w - iw0);
                        double acc = B[co];
                        for (int ci = 0; ci < g.ci; ++ci) {
                            const S* xbase = X + n * xn + ci * xc;
                            const S* wbase = W + co * wo + ci * wc;
                            for (int kd = kd0; kd < kd1; ++kd) {
                                const int id = id0 + kd;
                                for (int kh = kh0; kh < kh1; ++kh) {
                                    const int ih = ih0 + kh;
                                    const S* xr = xbase + (static_cast<int64_t>(id) * g.h + ih) * g.w + iw0;
                                    const S* wr = wbase + (static_cast<int64_t>(kd) * g.k + kh) * g.k;
                                    for (int kw = kw0; kw < kw1; ++kw)
                                        acc += static_cast<double>(wr[kw]) * xr[kw];
                                }
                            }
                        }
                        Y[yi] = static_cast<S>(acc);
                    }
                }
            }

    return make_node<S>(std::move(out), {x, w, b}, [g](Node<S>& node) {
        const S* X = node.parents[0]->val.data();
        const S* W = node.parents[1]->val.data();
        const S* G = node.grad.data();
        const bool need_x = node.parents[0]->requires_grad;
        const bool need_w = node.parents[1]->requires_grad;
        const bool need_b = node.parents[2]->requires_grad;
        S* DX = need_x ? gof(node.parents[0]).data() : nullptr;
        S* DW = need_w ? gof(node.parents[1]).data() : nullptr;
        S* DB = need_b ? gof(node.parents[2]).data() : nullptr;
        const int64_t xc = static_cast<int64_t>(g.d) * g.h * g.w;
        const int64_t xn = xc * g.ci;
        const int64_t wc = static_cast<int64_t>(g.k) * g.k * g.k;
        const int64_t wo = wc * g.ci;
        int64_t yi = 0;
        for (int n = 0; n < g.n; ++n)
            for (int co = 0; co < g.co; ++co)
                for (int od = 0; od < g.od; ++od) {
                    const int id0 = od * g.s - g.p;
                    const int kd0 = std::max(0, -id0), kd1 = std::min(g.k, g.d - id0);
                    for (int oh = 0; oh < g.oh; ++oh) {
                        const int ih0 = oh * g.s - g.p;
                        const int kh0 = std::max(0, -ih0), kh1 = std::min(g.k, g.h - ih0);
                        for (int ow = 0; ow < g.ow; ++ow, ++yi) {
                            const S gv = G[yi];
                            if (gv == S(0)) continue;
                            const int iw0 = ow * g.s - g.p;
                            const int kw0 = std::max(0, -iw0), kw1 = std::min(g.k, g.w - iw0);
                            if (DB) DB[co] += gv;
                            for (int ci = 0; ci < g.ci; ++ci) {
                                const int64_t xoff = n * xn + ci * xc;
                                const int64_t woff = co * wo + ci * wc;
                                for (int kd = kd0; kd < kd1; ++kd) {
                                    const int id = id0 + kd;
                                    for (int kh = kh0; kh < kh1; ++kh) {
                                        const int ih = ih0 + kh;
                                        const int64_t xrow = xoff + (static_cast<int64_t>(id) * g.h + ih) * g.w + iw0;
                                        const int64_t wrow = woff + (static_cast<int64_t>(kd) * g.k + kh) * g.k;
                                        if (DX) {
                                            const S* wr = W + wrow;
                                            S* dxr = DX + xrow;
                                            for (int kw = kw0; kw < kw1; ++kw) dxr[kw] += gv * wr[kw];
                                        }
                                        if (DW) {
                                            const S* xr = X + xrow;
                                            S* dwr = DW + wrow;
                                            for (int kw = kw0; kw < kw1; ++kw) dwr[kw] += gv * xr[kw];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
    });
}

inline int deconv_len(int in, int k, int s, int p, int opad) {
    return (in - 1) * s - 2 * p + k + opad;
}

// Transpose convolution, weight layout [Ci, Co, k, k, k]. Output padding is
// per-axis so the generator can mirror arbitrary encoder traces exactly.
template <class S>
Var<S> conv3d_transpose(const Var<S>& x, const Var<S>& w, const Var<S>& b, int stride, int pad,
                        int opad_d, int opad_h, int opad_w) {
    if (x->val.shape.size() != 5 || w->val.shape.size() != 5)
        throw ValidationError("conv3d_transpose: rank mismatch");
    const int N = x->val.dim(0), Ci = x->val.dim(1);
    const int D = x->val.dim(2), H = x->val.dim(3), Wd = x->val.dim(4);
    if (w->val.dim(0) != Ci) throw ValidationError("conv3d_transpose: channel mismatch");
    const int Co = w->val.dim(1), K = w->val.dim(2);
    const int s = stride, p = pad;
    const int Do = deconv_len(D, K, s, p, opad_d);
    const int Ho = deconv_len(H, K, s, p, opad_h);
    const int Wo = deconv_len(Wd, K, s, p, opad_w);
    if (Do < 1 || Ho < 1 || Wo < 1) throw ValidationError("conv3d_transpose: non-positive output");
    if (b->val.size() != Co) throw ValidationError("conv3d_transpose: bias size mismatch");

    Tensor<S> out({N, Co, Do, Ho, Wo});
    const S* X = x->val.data();
    const S* W = w->val.data();
    S* Y = out.data();
    const int64_t yc = static_cast<int64_t>(Do) * Ho * Wo;
    const int64_t yn = yc * Co;
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co) {
            S* yb = Y + n * yn + co * yc;
            const S bv = b->val.v[co];
            for (int64_t i = 0; i < yc; ++i) yb[i] = bv;
        }
    const int64_t xc = static_cast<int64_t>(D) * H * Wd;
    const int64_t xn = xc * Ci;
    const int64_t wc = static_cast<int64_t>(K) * K * K;
    const int64_t wci = wc * Co;
    for (int n = 0; n < N; ++n)
        for (int ci = 0; ci < Ci; ++ci) {
            const S* xb = X + n * xn + ci * xc;
            for (int id = 0; id < D; ++id) {
                const int od0 = id * s - p;
                const int kd0 = std::max(0, -od0), kd1 = std::min(K, Do - od0);
                for (int ih = 0; ih < H; ++ih) {
                    const int oh0 = ih * s - p;
                    const int kh0 = std::max(0, -oh0), kh1 = std::min(K, Ho - oh0);
                    for (int iw = 0; iw < Wd; ++iw) {
                        const S xv = xb[(static_cast<int64_t>(id) * H + ih) * Wd + iw];
                        if (xv == S(0)) continue;
                        const int ow0 = iw * s - p;
                        const int kw0 = std::max(0, -ow0), kw1 = std::min(K, Wo - ow0);
                        for (int co = 0; co < Co; ++co) {
                            const S* wb = W + ci * wci + co * wc;
                            S* yb = Y + n * yn + co * yc;
                            for (int kd = kd0; kd < kd1; ++kd) {
                                const int od = od0 + kd;
                                for (int kh = kh0; kh < kh1; ++kh) {
                                    const int oh = oh0 + kh;
                                    S* yr = yb + (static_cast<int64_t>(od) * Ho + oh) * Wo + ow0;
                                    const S* wr = wb + (static_cast<int64_t>(kd) * K + kh) * K;
                                    for (int kw = kw0; kw < kw1; ++kw) yr[kw] += xv * wr[kw];
                                }
                            }
                        }
                    }
                }
            }
        }

    struct Geom {
        int N, Ci, D, H, Wd, Co, K, s, p, Do, Ho, Wo;
    } geo{N, Ci, D, H, Wd, Co, K, s, p, Do, Ho, Wo};

    return make_node<S>(std::move(out), {x, w, b}, [geo](Node<S>& node) {
        const S* X = node.parents[0]->val.data();
        const S* W = node.parents[1]->val.data();
        const S* G = node.grad.data();
        const bool need_x = node.parents[0]->requires_grad;
        const bool need_w = node.parents[1]->requires_grad;
        const bool need_b = node.parents[2]->requires_grad;
        S* DX = need_x ? gof(node.parents[0]).data() : nullptr;
        S* DW = need_w ? gof(node.parents[1]).data() : nullptr;
        S* DB = need_b ? gof(node.parents[2]).data() : nullptr;
        const int64_t yc = static_cast<int64_t>(geo.Do) * geo.Ho * geo.Wo;
        const int64_t yn = yc * geo.Co;
        const int64_t xc = static_cast<int64_t>(geo.D) * geo.H * geo.Wd;
        const int64_t xn = xc * geo.Ci;
        const int64_t wc = static_cast<int64_t>(geo.K) * geo.K * geo.K;
        const int64_t wci = wc * geo.Co;
        if (DB) {
            for (int n = 0; n < geo.N; ++n)
                for (int co = 0; co < geo.Co; ++co) {
                    const S* gr = G + n * yn + co * yc;
                    double acc = 0;
                    for (int64_t i = 0; i < yc; ++i) acc += gr[i];
                    DB[co] += static_cast<S>(acc);
                }
        }
        if (!DX && !DW) return;
        for (int n = 0; n < geo.N; ++n)
            for (int ci = 0; ci < geo.Ci; ++ci) {
                for (int id = 0; id < geo.D; ++id) {
                    const int od0 = id * geo.s - geo.p;
                    const int kd0 = std::max(0, -od0), kd1 = std::min(geo.K, geo.Do - od0);
                    for (int ih = 0; ih < geo.H; ++ih) {
                        const int oh0 = ih * geo.s - geo.p;
                        const int kh0 = std::max(0, -oh0), kh1 = std::min(geo.K, geo.Ho - oh0);
                        for (int iw = 0; iw < geo.Wd; ++iw) {
                            const int ow0 = iw * geo.s - geo.p;
                            const int kw0 = std::max(0, -ow0), kw1 = std::min(geo.K, geo.Wo - ow0);
                            const int64_t xi = n * xn + ci * xc + (static_cast<int64_t>(id) * geo.H + ih) * geo.Wd + iw;
                            const S xv = X[xi];
                            double dx_acc = 0;
                            for (int co = 0; co < geo.Co; ++co) {
                                const S* wb = W + ci * wci + co * wc;
                                const S* gb = G + n * yn + co * yc;
                                S* dwb = DW ? DW + ci * wci + co * wc : nullptr;
                                for (int kd = kd0; kd < kd1; ++kd) {
                                    const int od = od0 + kd;
                                    for (int kh = kh0; kh < kh1; ++kh) {
                                        const int oh = oh0 + kh;
                                        const S* gr = gb + (static_cast<int64_t>(od) * geo.Ho + oh) * geo.Wo + ow0;
                                        const S* wr = wb + (static_cast<int64_t>(kd) * geo.K + kh) * geo.K;
                                        S* dwr = dwb ? dwb + (static_cast<int64_t>(kd) * geo.K + kh) * geo.K : nullptr;
                                        for (int kw = kw0; kw < kw1; ++kw) {
                                            if (DX) dx_acc += static_cast<double>(gr[kw]) * wr[kw];
                                            if (dwr) dwr[kw] += xv * gr[kw];
                                        }
                                    }
                                }
                            }
                            if (DX) DX[xi] += static_cast<S>(dx_acc);
                        }
                    }
                }
            }
    });
}

// Non-overlapping average pooling with ceil semantics; partial edge windows
// are averaged over their true voxel count.
template <class S>
Var<S> avg_pool3d(const Var<S>& x, int f) {
    if (x->val.shape.size() != 5) throw ValidationError("avg_pool3d: input must be [N,C,D,H,W]");
    if (f < 1) throw ValidationError("avg_pool3d: factor must be >= 1");
    const int N = x->val.dim(0), C = x->val.dim(1);
    const int D = x->val.dim(2), H = x->val.dim(3), W = x->val.dim(4);
    const int Do = (D + f - 1) / f, Ho = (H + f - 1) / f, Wo = (W + f - 1) / f;
    Tensor<S> out({N, C, Do, Ho, Wo});
    const S* X = x->val.data();
    S* Y = out.data();
    const int64_t xc = static_cast<int64_t>(D) * H * W;
    int64_t yi = 0;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const S* xb = X + (static_cast<int64_t>(n) * C + c) * xc;
            for (int od = 0; od < Do; ++od) {
                const int d1 = std::min(D, (od + 1) * f);
                for (int oh = 0; oh < Ho; ++oh) {
                    const int h1 = std::min(H, (oh + 1) * f);
                    for (int ow = 0; ow < Wo; ++ow, ++yi) {
                        const int w1 = std::min(W, (ow + 1) * f);
                        double acc = 0;
                        int cnt = 0;
                        for (int id = od * f; id < d1; ++id)
                            for (int ih = oh * f; ih < h1; ++ih)
                                for (int iw = ow * f; iw < w1; ++iw, ++cnt)
                                    acc += xb[(static_cast<int64_t>(id) * H + ih) * W + iw];
                        Y[yi] = static_cast<S>(acc / cnt);
                    }
                }
            }
        }
    struct Geom { int N, C, D, H, W, f, Do, Ho, Wo; } g{N, C, D, H, W, f, Do, Ho, Wo};
    return make_node<S>(std::move(out), {x}, [g](Node<S>& node) {
        Tensor<S>& dx = gof(node.parents[0]);
        const S* G = node.grad.data();
        const int64_t xc = static_cast<int64_t>(g.D) * g.H * g.W;
        int64_t yi = 0;
        for (int n = 0; n < g.N; ++n)
            for (int c = 0; c < g.C; ++c) {
                S* dxb = dx.data() + (static_cast<int64_t>(n) * g.C + c) * xc;
                for (int od = 0; od < g.Do; ++od) {
                    const int d1 = std::min(g.D, (od + 1) * g.f);
                    for (int oh = 0; oh < g.Ho; ++oh) {
                        const int h1 = std::min(g.H, (oh + 1) * g.f);
                        for (int ow = 0; ow < g.Wo; ++ow, ++yi) {
                            const int w1 = std::min(g.W, (ow + 1) * g.f);
                            int cnt = (d1 - od * g.f) * (h1 - oh * g.f) * (w1 - ow * g.f);
                            const S gv = G[yi] / static_cast<S>(cnt);
                            for (int id = od * g.f; id < d1; ++id)
                                for (int ih = oh * g.f; ih < h1; ++ih)
                                    for (int iw = ow * g.f; iw < w1; ++iw)
                                        dxb[(static_cast<int64_t>(id) * g.H + ih) * g.W + iw] += gv;
                        }
                    }
                }
            }
    });
}

// ---------------------------------------------------------------------------
// 1-D convolution along rows of [L, C] features (time-major)
// ---------------------------------------------------------------------------

template <class S>
Var<S> conv1d_lc(const Var<S>& x, const Var<S>& w, const Var<S>& b, int stride, int pad) {
    if (x->val.shape.size() != 2) throw ValidationError("conv1d: input must be [L, C]");
    const int L = x->val.dim(0), Ci = x->val.dim(1);
    if (w->val.shape.size() != 3 || w->val.dim(1) != Ci)
        throw ValidationError("conv1d: weight must be [Co,Ci,k] with matching channels");
    const int Co = w->val.dim(0), K = w->val.dim(2);
    const int Lo = conv_len(L, K, stride, pad);
    if (Lo < 1)
        throw ValidationError("conv1d: sequence of length " + std::to_string(L) +
                              " too short for kernel " + std::to_string(K));
    if (b->val.size() != Co) throw ValidationError("conv1d: bias size mismatch");
    Tensor<S> out({Lo, Co});
    for (int lo = 0; lo < Lo; ++lo) {
        const int l0 = lo * stride - pad;
        const int k0 = std::max(0, -l0), k1 = std::min(K, L - l0);
        for (int co = 0; co < Co; ++co) {
            double acc = b->val.v[co];
            for (int kk = k0; kk < k1; ++kk) {
                const S* xr = x->val.data() + static_cast<size_t>(l0 + kk) * Ci;
                const S* wr = w->val.data() + (static_cast<size_t>(co) * Ci) * K + kk;
                for (int ci = 0; ci < Ci; ++ci) acc += static_cast<double>(xr[ci]) * wr[static_cast<size_t>(ci) * K];
            }
            out.v[static_cast<size_t>(lo) * Co + co] = static_cast<S>(acc);
        }
    }
    struct Geom { int L, Ci, Co, K, s, p, Lo; } g{L, Ci, Co, K, stride, pad, Lo};
    return make_node<S>(std::move(out), {x, w, b}, [g](Node<S>& node) {
        const S* X = node.parents[0]->val.data();
        const S* W = node.parents[1]->val.data();
        const S* G = node.grad.data();
        S* DX = node.parents[0]->requires_grad ? gof(node.parents[0]).data() : nullptr;
        S* DW = node.parents[1]->requires_grad ? gof(node.parents[1]).data() : nullptr;
        S* DB = node.parents[2]->requires_grad ? gof(node.parents[2]).data() : nullptr;
        for (int lo = 0; lo < g.Lo; ++lo) {
            const int l0 = lo * g.s - g.p;
            const int k0 = std::max(0, -l0), k1 = std::min(g.K, g.L - l0);
            for (int co = 0; co < g.Co; ++co) {
                const S gv = G[static_cast<size_t>(lo) * g.Co + co];
                if (gv == S(0)) continue;
                if (DB) DB[co] += gv;
                for (int kk = k0; kk < k1; ++kk) {
                    const int64_t xoff = static_cast<int64_t>(l0 + kk) * g.Ci;
                    const int64_t woff = static_cast<int64_t>(co) * g.Ci * g.K + kk;
                    for (int ci = 0; ci < g.Ci; ++ci) {
                        if (DX) DX[xoff + ci] += gv * W[woff + static_cast<int64_t>(ci) * g.K];
                        if (DW) DW[woff + static_cast<int64_t>(ci) * g.K] += gv * X[xoff + ci];
                    }
                }
            }
        }
    });
}

template <class S>
Var<S> conv1d_transpose_lc(const Var<S>& x, const Var<S>& w, const Var<S>& b, int stride, int pad,
                           int opad) {
    if (x->val.shape.size() != 2) throw ValidationError("conv1d_transpose: input must be [L, C]");
    const int L = x->val.dim(0), Ci = x->val.dim(1);
    if (w->val.shape.size() != 3 || w->val.dim(0) != Ci)
        throw ValidationError("conv1d_transpose: weight must be [Ci,Co,k]");
    const int Co = w->val.dim(1), K = w->val.dim(2);
    const int Lo = deconv_len(L, K, stride, pad, opad);
    if (Lo < 1) throw ValidationError("conv1d_transpose: non-positive output length");
    if (b->val.size() != Co) throw ValidationError("conv1d_transpose: bias size mismatch");
    Tensor<S> out({Lo, Co});
    for (int lo = 0; lo < Lo; ++lo)
        for (int co = 0; co < Co; ++co) out.v[static_cast<size_t>(lo) * Co + co] = b->val.v[co];
    for (int l = 0; l < L; ++l) {
        const int o0 = l * stride - pad;
        const int k0 = std::max(0, -o0), k1 = std::min(K, Lo - o0);
        const S* xr = x->val.data() + static_cast<size_t>(l) * Ci;
        for (int ci = 0; ci < Ci; ++ci) {
            const S xv = xr[ci];
            if (xv == S(0)) continue;
            for (int co = 0; co < Co; ++co) {
                const S* wr = w->val.data() + (static_cast<size_t>(ci) * Co + co) * K;
                for (int kk = k0; kk < k1; ++kk)
                    out.v[static_cast<size_t>(o0 + kk) * Co + co] += xv * wr[kk];
            }
        }
    }
    struct Geom { int L, Ci, Co, K, s, p, Lo; } g{L, Ci, Co, K, stride, pad, Lo};
    return make_node<S>(std::move(out), {x, w, b}, [g](Node<S>& node) {
        const S* X = node.parents[0]->val.data();
        const S* W = node.parents[1]->val.data();
        const S* G = node.grad.data();
        S* DX = node.parents[0]->requires_grad ? gof(node.parents[0]).data() : nullptr;
        S* DW = node.parents[1]->requires_grad ? gof(node.parents[1]).data() : nullptr;
        S* DB = node.parents[2]->requires_grad ? gof(node.parents[2]).data() : nullptr;
        if (DB) {
            for (int lo = 0; lo < g.Lo; ++lo)
                for (int co = 0; co < g.Co; ++co) DB[co] += G[static_cast<size_t>(lo) * g.Co + co];
        }
        for (int l = 0; l < g.L; ++l) {
            const int o0 = l * g.s - g.p;
            const int k0 = std::max(0, -o0), k1 = std::min(g.K, g.Lo - o0);
            for (int ci = 0; ci < g.Ci; ++ci) {
                const int64_t xi = static_cast<int64_t>(l) * g.Ci + ci;
                double dx_acc = 0;
                for (int co = 0; co < g.Co; ++co) {
                    const int64_t woff = (static_cast<int64_t>(ci) * g.Co + co) * g.K;
                    for (int kk = k0; kk < k1; ++kk) {
                        const S gv = G[static_cast<size_t>(o0 + kk) * g.Co + co];
                        if (DX) dx_acc += static_cast<double>(gv) * W[woff + kk];
                        if (DW) DW[woff + kk] += X[xi] * gv;
                    }
                }
                if (DX) DX[xi] += static_cast<S>(dx_acc);
            }
        }
    });
}

} // namespace fmrigen::ad
