#pragma once

#include "a2hash/tensor.hpp"

namespace a2 {

// Output spatial size rules.
inline int conv_out(int in, int kern, int stride, int pad) {
    return (in + 2 * pad - kern) / stride + 1;
}
inline int tconv_out(int in, int kern, int stride, int pad) {
    return (in - 1) * stride - 2 * pad + kern;
}

// Direct convolution kernels. x: (N,Cin,H,W), w: (Cout,Cin,kh,kw),
// b: (Cout) or empty, y: (N,Cout,Ho,Wo). The `omp` versions parallelize
// loops where every iteration owns its output slot, so results are
// bit-identical to the serial reference for any thread count.
namespace kernels {

void conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                    Tensor& y, int stride, int pad);
void conv2d_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx,
                           int stride, int pad);
void conv2d_backward_weight(const Tensor& x, const Tensor& gy, Tensor& gw,
                            Tensor& gb, int stride, int pad);

// Transposed convolution. x: (N,Cin,H,W), w: (Cin,Cout,kh,kw).
void tconv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                     Tensor& y, int stride, int pad);
void tconv2d_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx,
                            int stride, int pad);
void tconv2d_backward_weight(const Tensor& x, const Tensor& gy, Tensor& gw,
                             Tensor& gb, int stride, int pad);

// Serial reference implementations, kept for kernel equivalence tests and
// the benchmark target.
namespace ref {
void conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                    Tensor& y, int stride, int pad);
void tconv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                     Tensor& y, int stride, int pad);
}  // namespace ref

}  // namespace kernels
}  // namespace a2
