#pragma once

#include <functional>
#include <optional>
#include <string>

#include "a2hash/tensor.hpp"

namespace a2 {

// Closed primitive set; every graph node carries exactly one kind.
enum class OpKind {
    leaf,
    matmul,
    conv2d,
    transposed_conv2d,
    tanh_op,
    relu,
    hadamard,
    concat,
    global_avg_pool,
    spatial_softmax,
    frobenius_sq,
    add,
    scale,
};

const char* op_name(OpKind k);

struct Node {
    OpKind op = OpKind::leaf;
    std::vector<int> inputs;
    Tensor value;
    std::vector<double> grad;   // filled during backward
    bool needs_grad = false;    // any leaf below requires grad
    Tensor* bound = nullptr;    // leaf only: external tensor receiving grads

    // op attributes
    bool trans_a = false, trans_b = false;  // matmul
    int stride = 1, pad = 0;                // conv / tconv
    double factor = 1.0;                    // scale
};

struct GraphError : std::runtime_error {
    int node_id;
    GraphError(int id, const std::string& msg)
        : std::runtime_error("node " + std::to_string(id) + ": " + msg), node_id(id) {}
};

// Tape-style computation graph: nodes are appended in topological order by
// construction, forward values are computed eagerly, backward replays the
// tape in reverse. One graph serves one forward/backward pass.
class Graph {
public:
    // Binds an external tensor as a leaf. If it requires grad, backward
    // accumulates into tensor.grad.
    int leaf(Tensor& t);
    // Copies a constant into the graph (no gradient).
    int constant(Tensor t);

    int matmul(int a, int b, bool trans_a = false, bool trans_b = false);
    // x: (N,Cin,H,W) or (N,Cin) viewed as (N,Cin,1,1); w: (Cout,Cin,kh,kw);
    // bias (Cout) or -1 for none.
    int conv2d(int x, int w, int bias, int stride, int pad);
    // w: (Cin,Cout,kh,kw)
    int transposed_conv2d(int x, int w, int bias, int stride, int pad);
    int tanh_(int x);
    int relu(int x);
    // Elementwise product; b may be (N,1,H,W) against a (N,C,H,W), broadcast
    // over channels.
    int hadamard(int a, int b);
    // Concatenates 2-D tensors (N,d_i) along the feature axis.
    int concat(const std::vector<int>& parts);
    int global_avg_pool(int x);  // (N,C,H,W) -> (N,C)
    int spatial_softmax(int x);  // per (n,c) softmax over H*W
    int frobenius_sq(int x);     // sum of squares -> scalar
    int add(int a, int b);       // same shape
    int scale(int a, double factor);

    // Convenience: a + (-1) * b.
    int sub(int a, int b) { return add(a, scale(b, -1.0)); }

    const Tensor& value(int id) const { return nodes_.at(id).value; }
    const std::vector<double>& grad(int id) const { return nodes_.at(id).grad; }
    int size() const { return static_cast<int>(nodes_.size()); }
    OpKind op(int id) const { return nodes_.at(id).op; }
    const std::vector<int>& inputs(int id) const { return nodes_.at(id).inputs; }

    // Reverse pass from a scalar loss node; accumulates into the .grad of
    // every bound leaf with requires_grad (existing grads are added to, so
    // zero them between steps).
    void backward(int loss_id);

private:
    std::vector<Node> nodes_;
    int push(Node n);
    void check_finite(int id) const;
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// `f` must be a pure function of the param tensors' current data.
struct GradCheckDetail {
    int param = -1;
    std::int64_t index = -1;
    double analytic = 0.0, numeric = 0.0;
};
double finite_diff_check(const std::function<double()>& f,
                         const std::vector<Tensor*>& params,
                         const std::vector<std::vector<double>>& analytic,
                         double eps, GradCheckDetail* detail = nullptr);

// p <- p - lr * (g + weight_decay * p), elementwise over every param.
void sgd_step(const std::vector<Tensor*>& params, double lr, double weight_decay);

}  // namespace a2
