#include "a2hash/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace a2::kernels {

namespace {

struct ConvDims {
    int N, Cin, H, W, Cout, kh, kw, Ho, Wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
    ConvDims d{};
    d.N = x.shape[0];
    d.Cin = x.shape[1];
    d.H = x.shape[2];
    d.W = x.shape[3];
    d.Cout = w.shape[0];
    d.kh = w.shape[2];
    d.kw = w.shape[3];
    d.Ho = conv_out(d.H, d.kh, stride, pad);
    d.Wo = conv_out(d.W, d.kw, stride, pad);
    return d;
}

ConvDims tconv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
    ConvDims d{};
    d.N = x.shape[0];
    d.Cin = x.shape[1];
    d.H = x.shape[2];
    d.W = x.shape[3];
    d.Cout = w.shape[1];
    d.kh = w.shape[2];
    d.kw = w.shape[3];
    d.Ho = tconv_out(d.H, d.kh, stride, pad);
    d.Wo = tconv_out(d.W, d.kw, stride, pad);
    return d;
}

inline double conv_cell(const double* xs, const double* ws, const ConvDims& d,
                        int oh, int ow, int stride, int pad) {
    // xs points at one image (Cin,H,W), ws at one filter (Cin,kh,kw).
    double acc = 0.0;
    for (int c = 0; c < d.Cin; ++c) {
        const double* xc = xs + static_cast<std::size_t>(c) * d.H * d.W;
        const double* wc = ws + static_cast<std::size_t>(c) * d.kh * d.kw;
        for (int i = 0; i < d.kh; ++i) {
            const int ih = oh * stride - pad + i;
            if (ih < 0 || ih >= d.H) continue;
            for (int j = 0; j < d.kw; ++j) {
                const int iw = ow * stride - pad + j;
                if (iw < 0 || iw >= d.W) continue;
                acc += xc[ih * d.W + iw] * wc[i * d.kw + j];
            }
        }
    }
    return acc;
}

}  // namespace

void conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                    Tensor& y, int stride, int pad) {
    const ConvDims d = conv_dims(x, w, stride, pad);
    y = Tensor({d.N, d.Cout, d.Ho, d.Wo});
    const bool has_bias = !b.data.empty();
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.N; ++n) {
        for (int co = 0; co < d.Cout; ++co) {
            const double* xs =
                x.data.data() + static_cast<std::size_t>(n) * d.Cin * d.H * d.W;
            const double* ws =
                w.data.data() + static_cast<std::size_t>(co) * d.Cin * d.kh * d.kw;
            double* ys = y.data.data() +
                         (static_cast<std::size_t>(n) * d.Cout + co) * d.Ho * d.Wo;
            const double bias = has_bias ? b.data[co] : 0.0;
            for (int oh = 0; oh < d.Ho; ++oh)
                for (int ow = 0; ow < d.Wo; ++ow)
                    ys[oh * d.Wo + ow] =
                        conv_cell(xs, ws, d, oh, ow, stride, pad) + bias;
        }
    }
}

void conv2d_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx,
                           int stride, int pad) {
    // gx(n,c,ih,iw) = sum over (co,oh,ow,i,j) hitting that input cell.
    const int N = gy.shape[0], Cout = gy.shape[1], Ho = gy.shape[2], Wo = gy.shape[3];
    const int Cin = w.shape[1], kh = w.shape[2], kw = w.shape[3];
    const int H = gx.shape[2], W = gx.shape[3];
    // Accumulation into gx.data; each (n,c) slice owned by one iteration.
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < Cin; ++c) {
            double* gxs = gx.data.data() +
                          (static_cast<std::size_t>(n) * Cin + c) * H * W;
            for (int co = 0; co < Cout; ++co) {
                const double* gys =
                    gy.data.data() +
                    (static_cast<std::size_t>(n) * Cout + co) * Ho * Wo;
                const double* ws = w.data.data() +
                                   (static_cast<std::size_t>(co) * Cin + c) * kh * kw;
                for (int oh = 0; oh < Ho; ++oh) {
                    for (int ow = 0; ow < Wo; ++ow) {
                        const double g = gys[oh * Wo + ow];
                        if (g == 0.0) continue;
                        for (int i = 0; i < kh; ++i) {
                            const int ih = oh * stride - pad + i;
                            if (ih < 0 || ih >= H) continue;
                            for (int j = 0; j < kw; ++j) {
                                const int iw = ow * stride - pad + j;
                                if (iw < 0 || iw >= W) continue;
                                gxs[ih * W + iw] += g * ws[i * kw + j];
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_weight(const Tensor& x, const Tensor& gy, Tensor& gw,
                            Tensor& gb, int stride, int pad) {
    const int N = gy.shape[0], Cout = gy.shape[1], Ho = gy.shape[2], Wo = gy.shape[3];
    const int Cin = x.shape[1], H = x.shape[2], W = x.shape[3];
    const int kh = gw.shape[2], kw = gw.shape[3];
    // Each (co,c,i,j) weight cell sums serially over batch and positions,
    // so the reduction order is fixed regardless of thread count.
#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < Cout; ++co) {
        for (int c = 0; c < Cin; ++c) {
            double* gws = gw.data.data() +
                          (static_cast<std::size_t>(co) * Cin + c) * kh * kw;
            for (int i = 0; i < kh; ++i) {
                for (int j = 0; j < kw; ++j) {
                    double acc = 0.0;
                    for (int n = 0; n < N; ++n) {
                        const double* xs =
                            x.data.data() +
                            (static_cast<std::size_t>(n) * Cin + c) * H * W;
                        const double* gys =
                            gy.data.data() +
                            (static_cast<std::size_t>(n) * Cout + co) * Ho * Wo;
                        for (int oh = 0; oh < Ho; ++oh) {
                            const int ih = oh * stride - pad + i;
                            if (ih < 0 || ih >= H) continue;
                            for (int ow = 0; ow < Wo; ++ow) {
                                const int iw = ow * stride - pad + j;
                                if (iw < 0 || iw >= W) continue;
                                acc += xs[ih * W + iw] * gys[oh * Wo + ow];
                            }
                        }
                    }
                    gws[i * kw + j] += acc;
                }
            }
        }
    }
    if (!gb.data.empty()) {
        for (int co = 0; co < Cout; ++co) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n) {
                const double* gys = gy.data.data() +
                                    (static_cast<std::size_t>(n) * Cout + co) * Ho * Wo;
                for (int p = 0; p < Ho * Wo; ++p) acc += gys[p];
            }
            gb.data[co] += acc;
        }
    }
}

void tconv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                     Tensor& y, int stride, int pad) {
    const ConvDims d = tconv_dims(x, w, stride, pad);
    y = Tensor({d.N, d.Cout, d.Ho, d.Wo});
    const bool has_bias = !b.data.empty();
    // y(n,co,oh,ow) = sum_{c,ih,iw,i,j : ih*s-p+i==oh, iw*s-p+j==ow}
    //                 x(n,c,ih,iw) * w(c,co,i,j)
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.N; ++n) {
        for (int co = 0; co < d.Cout; ++co) {
            double* ys = y.data.data() +
                         (static_cast<std::size_t>(n) * d.Cout + co) * d.Ho * d.Wo;
            const double bias = has_bias ? b.data[co] : 0.0;
            for (int oh = 0; oh < d.Ho; ++oh) {
                for (int ow = 0; ow < d.Wo; ++ow) {
                    double acc = bias;
                    for (int c = 0; c < d.Cin; ++c) {
                        const double* xs =
                            x.data.data() +
                            (static_cast<std::size_t>(n) * d.Cin + c) * d.H * d.W;
                        const double* ws =
                            w.data.data() +
                            (static_cast<std::size_t>(c) * d.Cout + co) * d.kh * d.kw;
                        for (int i = 0; i < d.kh; ++i) {
                            const int num = oh + pad - i;
                            if (num < 0 || num % stride != 0) continue;
                            const int ih = num / stride;
                            if (ih >= d.H) continue;
                            for (int j = 0; j < d.kw; ++j) {
                                const int numw = ow + pad - j;
                                if (numw < 0 || numw % stride != 0) continue;
                                const int iw = numw / stride;
                                if (iw >= d.W) continue;
                                acc += xs[ih * d.W + iw] * ws[i * d.kw + j];
                            }
                        }
                    }
                    ys[oh * d.Wo + ow] = acc;
                }
            }
        }
    }
}

void tconv2d_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx,
                            int stride, int pad) {
    // The input gradient of a transposed conv is a plain convolution of gy
    // with the same filters.
    const int N = gy.shape[0], Cout = gy.shape[1], Ho = gy.shape[2], Wo = gy.shape[3];
    const int Cin = w.shape[0], kh = w.shape[2], kw = w.shape[3];
    const int H = gx.shape[2], W = gx.shape[3];
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < Cin; ++c) {
            double* gxs = gx.data.data() +
                          (static_cast<std::size_t>(n) * Cin + c) * H * W;
            for (int ih = 0; ih < H; ++ih) {
                for (int iw = 0; iw < W; ++iw) {
                    double acc = 0.0;
                    for (int co = 0; co < Cout; ++co) {
                        const double* gys =
                            gy.data.data() +
                            (static_cast<std::size_t>(n) * Cout + co) * Ho * Wo;
                        const double* ws =
                            w.data.data() +
                            (static_cast<std::size_t>(c) * Cout + co) * kh * kw;
                        for (int i = 0; i < kh; ++i) {
                            const int oh = ih * stride - pad + i;
                            if (oh < 0 || oh >= Ho) continue;
                            for (int j = 0; j < kw; ++j) {
                                const int ow = iw * stride - pad + j;
                                if (ow < 0 || ow >= Wo) continue;
                                acc += gys[oh * Wo + ow] * ws[i * kw + j];
                            }
                        }
                    }
                    gxs[ih * W + iw] += acc;
                }
            }
        }
    }
}

void tconv2d_backward_weight(const Tensor& x, const Tensor& gy, Tensor& gw,
                             Tensor& gb, int stride, int pad) {
    const int N = gy.shape[0], Cout = gy.shape[1], Ho = gy.shape[2], Wo = gy.shape[3];
    const int Cin = x.shape[1], H = x.shape[2], W = x.shape[3];
    const int kh = gw.shape[2], kw = gw.shape[3];
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < Cin; ++c) {
        for (int co = 0; co < Cout; ++co) {
            double* gws = gw.data.data() +
                          (static_cast<std::size_t>(c) * Cout + co) * kh * kw;
            for (int i = 0; i < kh; ++i) {
                for (int j = 0; j < kw; ++j) {
                    double acc = 0.0;
                    for (int n = 0; n < N; ++n) {
                        const double* xs =
                            x.data.data() +
                            (static_cast<std::size_t>(n) * Cin + c) * H * W;
                        const double* gys =
                            gy.data.data() +
                            (static_cast<std::size_t>(n) * Cout + co) * Ho * Wo;
                        for (int ih = 0; ih < H; ++ih) {
                            const int oh = ih * stride - pad + i;
                            if (oh < 0 || oh >= Ho) continue;
                            for (int iw = 0; iw < W; ++iw) {
                                const int ow = iw * stride - pad + j;
                                if (ow < 0 || ow >= Wo) continue;
                                acc += xs[ih * W + iw] * gys[oh * Wo + ow];
                            }
                        }
                    }
                    gws[i * kw + j] += acc;
                }
            }
        }
    }
    if (!gb.data.empty()) {
        for (int co = 0; co < Cout; ++co) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n) {
                const double* gys = gy.data.data() +
                                    (static_cast<std::size_t>(n) * Cout + co) * Ho * Wo;
                for (int p = 0; p < Ho * Wo; ++p) acc += gys[p];
            }
            gb.data[co] += acc;
        }
    }
}

namespace ref {

void conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                    Tensor& y, int stride, int pad) {
    const ConvDims d = conv_dims(x, w, stride, pad);
    y = Tensor({d.N, d.Cout, d.Ho, d.Wo});
    const bool has_bias = !b.data.empty();
    std::size_t idx = 0;
    for (int n = 0; n < d.N; ++n)
        for (int co = 0; co < d.Cout; ++co) {
            const double* xs =
                x.data.data() + static_cast<std::size_t>(n) * d.Cin * d.H * d.W;
            const double* ws =
                w.data.data() + static_cast<std::size_t>(co) * d.Cin * d.kh * d.kw;
            const double bias = has_bias ? b.data[co] : 0.0;
            for (int oh = 0; oh < d.Ho; ++oh)
                for (int ow = 0; ow < d.Wo; ++ow)
                    y.data[idx++] = conv_cell(xs, ws, d, oh, ow, stride, pad) + bias;
        }
}

void tconv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                     Tensor& y, int stride, int pad) {
    const ConvDims d = tconv_dims(x, w, stride, pad);
    y = Tensor({d.N, d.Cout, d.Ho, d.Wo});
    if (!b.data.empty())
        for (int n = 0; n < d.N; ++n)
            for (int co = 0; co < d.Cout; ++co)
                for (int p = 0; p < d.Ho * d.Wo; ++p)
                    y.data[(static_cast<std::size_t>(n) * d.Cout + co) * d.Ho * d.Wo + p] =
                        b.data[co];
    for (int n = 0; n < d.N; ++n)
        for (int c = 0; c < d.Cin; ++c)
            for (int ih = 0; ih < d.H; ++ih)
                for (int iw = 0; iw < d.W; ++iw) {
                    const double v =
                        x.data[(static_cast<std::size_t>(n) * d.Cin + c) * d.H * d.W +
                               ih * d.W + iw];
                    for (int co = 0; co < d.Cout; ++co) {
                        const double* ws =
                            w.data.data() +
                            (static_cast<std::size_t>(c) * d.Cout + co) * d.kh * d.kw;
                        double* ys =
                            y.data.data() +
                            (static_cast<std::size_t>(n) * d.Cout + co) * d.Ho * d.Wo;
                        for (int i = 0; i < d.kh; ++i) {
                            const int oh = ih * stride - pad + i;
                            if (oh < 0 || oh >= d.Ho) continue;
                            for (int j = 0; j < d.kw; ++j) {
                                const int ow = iw * stride - pad + j;
                                if (ow < 0 || ow >= d.Wo) continue;
                                ys[oh * d.Wo + ow] += v * ws[i * d.kw + j];
                            }
                        }
                    }
                }
}

}  // namespace ref
}  // namespace a2::kernels
