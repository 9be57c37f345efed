#include "a2hash/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "a2hash/kernels.hpp"

namespace a2 {

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::leaf: return "leaf";
        case OpKind::matmul: return "matmul";
        case OpKind::conv2d: return "conv2d";
        case OpKind::transposed_conv2d: return "transposed_conv2d";
        case OpKind::tanh_op: return "tanh";
        case OpKind::relu: return "relu";
        case OpKind::hadamard: return "hadamard";
        case OpKind::concat: return "concat";
        case OpKind::global_avg_pool: return "global_avg_pool";
        case OpKind::spatial_softmax: return "spatial_softmax";
        case OpKind::frobenius_sq: return "frobenius_sq";
        case OpKind::add: return "add";
        case OpKind::scale: return "scale";
    }
    return "?";
}

namespace {

// Reinterpret a rank-2 (N,C) tensor as (N,C,1,1); identical layout.
Tensor as_nchw(const Tensor& t) {
    if (t.rank() == 4) return t;
    Tensor v;
    v.shape = {t.shape[0], t.shape[1], 1, 1};
    v.data = t.data;
    return v;
}

void mm_accum(const double* A, const double* B, double* C, int p, int q, int r,
              bool ta, bool tb, int lda, int ldb) {
    // C(p x r) += op(A) * op(B); op(A) is p x q.
    for (int i = 0; i < p; ++i)
        for (int kk = 0; kk < q; ++kk) {
            const double a = ta ? A[kk * lda + i] : A[i * lda + kk];
            if (a == 0.0) continue;
            double* crow = C + static_cast<std::size_t>(i) * r;
            if (!tb) {
                const double* brow = B + static_cast<std::size_t>(kk) * ldb;
                for (int j = 0; j < r; ++j) crow[j] += a * brow[j];
            } else {
                for (int j = 0; j < r; ++j) crow[j] += a * B[j * ldb + kk];
            }
        }
}

}  // namespace

int Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void Graph::check_finite(int id) const {
    for (double v : nodes_[id].value.data)
        if (!std::isfinite(v)) throw GraphError(id, "non-finite input tensor");
}

int Graph::leaf(Tensor& t) {
    Node n;
    n.op = OpKind::leaf;
    n.value = t;  // copy of the values; grads flow back through `bound`
    n.needs_grad = t.requires_grad;
    n.bound = &t;
    int id = push(std::move(n));
    check_finite(id);
    return id;
}

int Graph::constant(Tensor t) {
    Node n;
    n.op = OpKind::leaf;
    n.value = std::move(t);
    int id = push(std::move(n));
    check_finite(id);
    return id;
}

int Graph::matmul(int a, int b, bool trans_a, bool trans_b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (A.rank() != 2 || B.rank() != 2)
        throw GraphError(size(), "matmul expects rank-2 operands");
    const int p = trans_a ? A.shape[1] : A.shape[0];
    const int q = trans_a ? A.shape[0] : A.shape[1];
    const int qb = trans_b ? B.shape[1] : B.shape[0];
    const int r = trans_b ? B.shape[0] : B.shape[1];
    if (q != qb)
        throw GraphError(size(), "matmul inner dims " + shape_str(A.shape) + " x " +
                                     shape_str(B.shape));
    Node n;
    n.op = OpKind::matmul;
    n.inputs = {a, b};
    n.trans_a = trans_a;
    n.trans_b = trans_b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    n.value = Tensor({p, r});
    mm_accum(A.data.data(), B.data.data(), n.value.data.data(), p, q, r, trans_a,
             trans_b, A.shape[1], B.shape[1]);
    return push(std::move(n));
}

int Graph::conv2d(int x, int w, int bias, int stride, int pad) {
    Tensor xin = as_nchw(nodes_[x].value);
    const Tensor& W = nodes_[w].value;
    if (W.rank() != 4) throw GraphError(size(), "conv2d weight must be rank-4");
    if (xin.shape[1] != W.shape[1])
        throw GraphError(size(), "conv2d channel mismatch " + shape_str(xin.shape) +
                                     " vs " + shape_str(W.shape));
    static const Tensor no_bias;
    const Tensor& B = bias >= 0 ? nodes_[bias].value : no_bias;
    Node n;
    n.op = OpKind::conv2d;
    n.inputs = {x, w, bias};
    n.stride = stride;
    n.pad = pad;
    n.needs_grad = nodes_[x].needs_grad || nodes_[w].needs_grad ||
                   (bias >= 0 && nodes_[bias].needs_grad);
    kernels::conv2d_forward(xin, W, B, n.value, stride, pad);
    return push(std::move(n));
}

int Graph::transposed_conv2d(int x, int w, int bias, int stride, int pad) {
    Tensor xin = as_nchw(nodes_[x].value);
    const Tensor& W = nodes_[w].value;
    if (W.rank() != 4)
        throw GraphError(size(), "transposed_conv2d weight must be rank-4");
    if (xin.shape[1] != W.shape[0])
        throw GraphError(size(), "transposed_conv2d channel mismatch");
    static const Tensor no_bias;
    const Tensor& B = bias >= 0 ? nodes_[bias].value : no_bias;
    Node n;
    n.op = OpKind::transposed_conv2d;
    n.inputs = {x, w, bias};
    n.stride = stride;
    n.pad = pad;
    n.needs_grad = nodes_[x].needs_grad || nodes_[w].needs_grad ||
                   (bias >= 0 && nodes_[bias].needs_grad);
    kernels::tconv2d_forward(xin, W, B, n.value, stride, pad);
    return push(std::move(n));
}

int Graph::tanh_(int x) {
    Node n;
    n.op = OpKind::tanh_op;
    n.inputs = {x};
    n.needs_grad = nodes_[x].needs_grad;
    n.value = nodes_[x].value;
    for (double& v : n.value.data) v = std::tanh(v);
    return push(std::move(n));
}

int Graph::relu(int x) {
    Node n;
    n.op = OpKind::relu;
    n.inputs = {x};
    n.needs_grad = nodes_[x].needs_grad;
    n.value = nodes_[x].value;
    for (double& v : n.value.data) v = v > 0.0 ? v : 0.0;
    return push(std::move(n));
}

int Graph::hadamard(int a, int b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    Node n;
    n.op = OpKind::hadamard;
    n.inputs = {a, b};
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    if (A.same_shape(B)) {
        n.value = A;
        for (std::size_t i = 0; i < A.data.size(); ++i) n.value.data[i] *= B.data[i];
    } else if (A.rank() == 4 && B.rank() == 4 && B.shape[1] == 1 &&
               A.shape[0] == B.shape[0] && A.shape[2] == B.shape[2] &&
               A.shape[3] == B.shape[3]) {
        // broadcast the single-channel mask over A's channels
        const int N = A.shape[0], C = A.shape[1], HW = A.shape[2] * A.shape[3];
        n.value = A;
        for (int nn = 0; nn < N; ++nn)
            for (int c = 0; c < C; ++c)
                for (int p = 0; p < HW; ++p)
                    n.value.data[(static_cast<std::size_t>(nn) * C + c) * HW + p] *=
                        B.data[static_cast<std::size_t>(nn) * HW + p];
    } else {
        throw GraphError(size(), "hadamard shape mismatch " + shape_str(A.shape) +
                                     " vs " + shape_str(B.shape));
    }
    return push(std::move(n));
}

int Graph::concat(const std::vector<int>& parts) {
    if (parts.empty()) throw GraphError(size(), "concat of nothing");
    const int N = nodes_[parts[0]].value.shape[0];
    int d = 0;
    for (int p : parts) {
        const Tensor& t = nodes_[p].value;
        if (t.rank() != 2 || t.shape[0] != N)
            throw GraphError(size(), "concat expects rank-2 parts with equal rows");
        d += t.shape[1];
    }
    Node n;
    n.op = OpKind::concat;
    n.inputs = parts;
    for (int p : parts) n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
    n.value = Tensor({N, d});
    for (int row = 0; row < N; ++row) {
        double* out = n.value.data.data() + static_cast<std::size_t>(row) * d;
        for (int p : parts) {
            const Tensor& t = nodes_[p].value;
            const int w = t.shape[1];
            const double* src = t.data.data() + static_cast<std::size_t>(row) * w;
            std::copy(src, src + w, out);
            out += w;
        }
    }
    return push(std::move(n));
}

int Graph::global_avg_pool(int x) {
    const Tensor& X = nodes_[x].value;
    if (X.rank() != 4) throw GraphError(size(), "global_avg_pool expects rank-4");
    const int N = X.shape[0], C = X.shape[1], HW = X.shape[2] * X.shape[3];
    Node n;
    n.op = OpKind::global_avg_pool;
    n.inputs = {x};
    n.needs_grad = nodes_[x].needs_grad;
    n.value = Tensor({N, C});
    for (int nn = 0; nn < N; ++nn)
        for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            const double* src =
                X.data.data() + (static_cast<std::size_t>(nn) * C + c) * HW;
            for (int p = 0; p < HW; ++p) acc += src[p];
            n.value.data[static_cast<std::size_t>(nn) * C + c] = acc / HW;
        }
    return push(std::move(n));
}

int Graph::spatial_softmax(int x) {
    const Tensor& X = nodes_[x].value;
    if (X.rank() != 4) throw GraphError(size(), "spatial_softmax expects rank-4");
    const int NC = X.shape[0] * X.shape[1], HW = X.shape[2] * X.shape[3];
    Node n;
    n.op = OpKind::spatial_softmax;
    n.inputs = {x};
    n.needs_grad = nodes_[x].needs_grad;
    n.value = X;
    for (int s = 0; s < NC; ++s) {
        double* v = n.value.data.data() + static_cast<std::size_t>(s) * HW;
        double mx = v[0];
        for (int p = 1; p < HW; ++p) mx = std::max(mx, v[p]);
        double z = 0.0;
        for (int p = 0; p < HW; ++p) {
            v[p] = std::exp(v[p] - mx);
            z += v[p];
        }
        for (int p = 0; p < HW; ++p) v[p] /= z;
    }
    return push(std::move(n));
}

int Graph::frobenius_sq(int x) {
    const Tensor& X = nodes_[x].value;
    Node n;
    n.op = OpKind::frobenius_sq;
    n.inputs = {x};
    n.needs_grad = nodes_[x].needs_grad;
    double acc = 0.0;
    for (double v : X.data) acc += v * v;
    n.value = Tensor::scalar(acc);
    return push(std::move(n));
}

int Graph::add(int a, int b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (!A.same_shape(B))
        throw GraphError(size(), "add shape mismatch " + shape_str(A.shape) + " vs " +
                                     shape_str(B.shape));
    Node n;
    n.op = OpKind::add;
    n.inputs = {a, b};
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    n.value = A;
    for (std::size_t i = 0; i < A.data.size(); ++i) n.value.data[i] += B.data[i];
    return push(std::move(n));
}

int Graph::scale(int a, double factor) {
    Node n;
    n.op = OpKind::scale;
    n.inputs = {a};
    n.factor = factor;
    n.needs_grad = nodes_[a].needs_grad;
    n.value = nodes_[a].value;
    for (double& v : n.value.data) v *= factor;
    return push(std::move(n));
}

void Graph::backward(int loss_id) {
    Node& loss = nodes_.at(loss_id);
    if (loss.value.numel() != 1)
        throw GraphError(loss_id, "backward requires a scalar loss node");
    for (Node& n : nodes_) n.grad.clear();
    loss.grad.assign(1, 1.0);

    auto grad_buf = [&](int id) -> std::vector<double>& {
        Node& n = nodes_[id];
        if (n.grad.empty()) n.grad.assign(n.value.data.size(), 0.0);
        return n.grad;
    };

    for (int id = loss_id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.grad.empty() || !n.needs_grad) continue;
        const std::vector<double>& g = n.grad;
        switch (n.op) {
            case OpKind::leaf:
                break;
            case OpKind::matmul: {
                const int a = n.inputs[0], b = n.inputs[1];
                const Tensor& A = nodes_[a].value;
                const Tensor& B = nodes_[b].value;
                const int p = n.value.shape[0], r = n.value.shape[1];
                const int q = n.trans_a ? A.shape[0] : A.shape[1];
                if (nodes_[a].needs_grad) {
                    std::vector<double>& ga = grad_buf(a);
                    // d/dA' = G * B'^T (p x q), then transpose back if needed
                    std::vector<double> gap(static_cast<std::size_t>(p) * q, 0.0);
                    mm_accum(g.data(), B.data.data(), gap.data(), p, r, q, false,
                             !n.trans_b, r, B.shape[1]);
                    if (!n.trans_a) {
                        for (std::size_t i = 0; i < gap.size(); ++i) ga[i] += gap[i];
                    } else {
                        for (int i = 0; i < p; ++i)
                            for (int j = 0; j < q; ++j)
                                ga[static_cast<std::size_t>(j) * p + i] +=
                                    gap[static_cast<std::size_t>(i) * q + j];
                    }
                }
                if (nodes_[b].needs_grad) {
                    std::vector<double>& gb = grad_buf(b);
                    // d/dB' = A'^T * G (q x r)
                    std::vector<double> gbp(static_cast<std::size_t>(q) * r, 0.0);
                    mm_accum(A.data.data(), g.data(), gbp.data(), q, p, r, !n.trans_a,
                             false, A.shape[1], r);
                    if (!n.trans_b) {
                        for (std::size_t i = 0; i < gbp.size(); ++i) gb[i] += gbp[i];
                    } else {
                        for (int i = 0; i < q; ++i)
                            for (int j = 0; j < r; ++j)
                                gb[static_cast<std::size_t>(j) * q + i] +=
                                    gbp[static_cast<std::size_t>(i) * r + j];
                    }
                }
                break;
            }
            case OpKind::conv2d:
            case OpKind::transposed_conv2d: {
                const int x = n.inputs[0], w = n.inputs[1], bias = n.inputs[2];
                Tensor xin = as_nchw(nodes_[x].value);
                Tensor gy;
                gy.shape = n.value.shape;
                gy.data = g;
                const bool tposed = n.op == OpKind::transposed_conv2d;
                if (nodes_[x].needs_grad) {
                    Tensor gx(xin.shape);
                    if (tposed)
                        kernels::tconv2d_backward_input(gy, nodes_[w].value, gx,
                                                        n.stride, n.pad);
                    else
                        kernels::conv2d_backward_input(gy, nodes_[w].value, gx,
                                                       n.stride, n.pad);
                    std::vector<double>& gxb = grad_buf(x);
                    for (std::size_t i = 0; i < gx.data.size(); ++i)
                        gxb[i] += gx.data[i];
                }
                if (nodes_[w].needs_grad ||
                    (bias >= 0 && nodes_[bias].needs_grad)) {
                    Tensor gw(nodes_[w].value.shape);
                    Tensor gb;
                    if (bias >= 0 && nodes_[bias].needs_grad)
                        gb = Tensor(nodes_[bias].value.shape);
                    if (tposed)
                        kernels::tconv2d_backward_weight(xin, gy, gw, gb, n.stride,
                                                         n.pad);
                    else
                        kernels::conv2d_backward_weight(xin, gy, gw, gb, n.stride,
                                                        n.pad);
                    if (nodes_[w].needs_grad) {
                        std::vector<double>& gwb = grad_buf(w);
                        for (std::size_t i = 0; i < gw.data.size(); ++i)
                            gwb[i] += gw.data[i];
                    }
                    if (bias >= 0 && nodes_[bias].needs_grad) {
                        std::vector<double>& gbb = grad_buf(bias);
                        for (std::size_t i = 0; i < gb.data.size(); ++i)
                            gbb[i] += gb.data[i];
                    }
                }
                break;
            }
            case OpKind::tanh_op: {
                std::vector<double>& gx = grad_buf(n.inputs[0]);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double y = n.value.data[i];
                    gx[i] += g[i] * (1.0 - y * y);
                }
                break;
            }
            case OpKind::relu: {
                std::vector<double>& gx = grad_buf(n.inputs[0]);
                const Tensor& X = nodes_[n.inputs[0]].value;
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (X.data[i] > 0.0) gx[i] += g[i];
                break;
            }
            case OpKind::hadamard: {
                const int a = n.inputs[0], b = n.inputs[1];
                const Tensor& A = nodes_[a].value;
                const Tensor& B = nodes_[b].value;
                if (A.same_shape(B)) {
                    if (nodes_[a].needs_grad) {
                        std::vector<double>& ga = grad_buf(a);
                        for (std::size_t i = 0; i < g.size(); ++i)
                            ga[i] += g[i] * B.data[i];
                    }
                    if (nodes_[b].needs_grad) {
                        std::vector<double>& gb = grad_buf(b);
                        for (std::size_t i = 0; i < g.size(); ++i)
                            gb[i] += g[i] * A.data[i];
                    }
                } else {
                    const int N = A.shape[0], C = A.shape[1],
                              HW = A.shape[2] * A.shape[3];
                    if (nodes_[a].needs_grad) {
                        std::vector<double>& ga = grad_buf(a);
                        for (int nn = 0; nn < N; ++nn)
                            for (int c = 0; c < C; ++c)
                                for (int p = 0; p < HW; ++p) {
                                    const std::size_t i =
                                        (static_cast<std::size_t>(nn) * C + c) * HW + p;
                                    ga[i] += g[i] *
                                             B.data[static_cast<std::size_t>(nn) * HW + p];
                                }
                    }
                    if (nodes_[b].needs_grad) {
                        std::vector<double>& gb = grad_buf(b);
                        for (int nn = 0; nn < N; ++nn)
                            for (int c = 0; c < C; ++c)
                                for (int p = 0; p < HW; ++p) {
                                    const std::size_t i =
                                        (static_cast<std::size_t>(nn) * C + c) * HW + p;
                                    gb[static_cast<std::size_t>(nn) * HW + p] +=
                                        g[i] * A.data[i];
                                }
                    }
                }
                break;
            }
            case OpKind::concat: {
                const int N = n.value.shape[0], d = n.value.shape[1];
                for (int row = 0; row < N; ++row) {
                    int off = 0;
                    for (int p : n.inputs) {
                        const int w = nodes_[p].value.shape[1];
                        if (nodes_[p].needs_grad) {
                            std::vector<double>& gp = grad_buf(p);
                            for (int j = 0; j < w; ++j)
                                gp[static_cast<std::size_t>(row) * w + j] +=
                                    g[static_cast<std::size_t>(row) * d + off + j];
                        }
                        off += w;
                    }
                }
                break;
            }
            case OpKind::global_avg_pool: {
                const Tensor& X = nodes_[n.inputs[0]].value;
                const int NC = X.shape[0] * X.shape[1], HW = X.shape[2] * X.shape[3];
                std::vector<double>& gx = grad_buf(n.inputs[0]);
                for (int s = 0; s < NC; ++s) {
                    const double gv = g[s] / HW;
                    for (int p = 0; p < HW; ++p)
                        gx[static_cast<std::size_t>(s) * HW + p] += gv;
                }
                break;
            }
            case OpKind::spatial_softmax: {
                const int NC = n.value.shape[0] * n.value.shape[1];
                const int HW = n.value.shape[2] * n.value.shape[3];
                std::vector<double>& gx = grad_buf(n.inputs[0]);
                for (int s = 0; s < NC; ++s) {
                    const double* y = n.value.data.data() + static_cast<std::size_t>(s) * HW;
                    const double* gy = g.data() + static_cast<std::size_t>(s) * HW;
                    double dot = 0.0;
                    for (int p = 0; p < HW; ++p) dot += gy[p] * y[p];
                    for (int p = 0; p < HW; ++p)
                        gx[static_cast<std::size_t>(s) * HW + p] +=
                            y[p] * (gy[p] - dot);
                }
                break;
            }
            case OpKind::frobenius_sq: {
                const Tensor& X = nodes_[n.inputs[0]].value;
                std::vector<double>& gx = grad_buf(n.inputs[0]);
                const double gs = g[0];
                for (std::size_t i = 0; i < X.data.size(); ++i)
                    gx[i] += 2.0 * gs * X.data[i];
                break;
            }
            case OpKind::add: {
                for (int in : n.inputs) {
                    if (!nodes_[in].needs_grad) continue;
                    std::vector<double>& gi = grad_buf(in);
                    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
                }
                break;
            }
            case OpKind::scale: {
                std::vector<double>& gx = grad_buf(n.inputs[0]);
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += n.factor * g[i];
                break;
            }
        }
    }

    for (Node& n : nodes_) {
        if (n.op != OpKind::leaf || !n.bound || !n.bound->requires_grad ||
            n.grad.empty())
            continue;
        if (n.bound->grad.empty()) n.bound->grad.assign(n.value.data.size(), 0.0);
        for (std::size_t i = 0; i < n.grad.size(); ++i) n.bound->grad[i] += n.grad[i];
    }
}

double finite_diff_check(const std::function<double()>& f,
                         const std::vector<Tensor*>& params,
                         const std::vector<std::vector<double>>& analytic,
                         double eps, GradCheckDetail* detail) {
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& t = *params[p];
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            const double save = t.data[i];
            t.data[i] = save + eps;
            const double fp = f();
            t.data[i] = save - eps;
            const double fm = f();
            t.data[i] = save;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[p][i];
            double err;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                err = std::numeric_limits<double>::infinity();
            else
                err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
            if (err > worst) {
                worst = err;
                if (detail) {
                    detail->param = static_cast<int>(p);
                    detail->index = static_cast<std::int64_t>(i);
                    detail->analytic = a;
                    detail->numeric = numeric;
                }
            }
        }
    }
    return worst;
}

void sgd_step(const std::vector<Tensor*>& params, double lr, double weight_decay) {
    for (Tensor* p : params) {
        if (!p->requires_grad) continue;
        if (p->grad.size() != p->data.size())
            throw std::invalid_argument("sgd_step: gradient/param shape mismatch");
        for (std::size_t i = 0; i < p->data.size(); ++i)
            p->data[i] -= lr * (p->grad[i] + weight_decay * p->data[i]);
    }
}

}  // namespace a2
