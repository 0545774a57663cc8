#include <cblas.h>

#include "s2c/ops.hpp"

namespace s2c {

namespace {

inline void blas_gemm(bool ta, bool tb, i64 m, i64 n, i64 k, float alpha, const float* a, i64 lda, const float* b,
                      i64 ldb, float beta, float* c, i64 ldc) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, (int)m, (int)n, (int)k,
                alpha, a, (int)lda, b, (int)ldb, beta, c, (int)ldc);
}
inline void blas_gemm(bool ta, bool tb, i64 m, i64 n, i64 k, double alpha, const double* a, i64 lda, const double* b,
                      i64 ldb, double beta, double* c, i64 ldc) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, (int)m, (int)n, (int)k,
                alpha, a, (int)lda, b, (int)ldb, beta, c, (int)ldc);
}

// col[(c*k*k + i*k + j), (hm*Wm + wm)] = src[c, hm*s - p + i, wm*s - p + j] (zero outside).
// The same gather serves conv forward (m-grid = output) and transposed-conv
// backward (m-grid = input).
template <typename T>
void im2col(const T* src, i64 C, i64 Hs, i64 Ws, i64 k, i64 stride, i64 pad, i64 Hm, i64 Wm, T* col) {
    const i64 M = Hm * Wm;
    for (i64 c = 0; c < C; ++c) {
        const T* plane = src + c * Hs * Ws;
        for (i64 i = 0; i < k; ++i)
            for (i64 j = 0; j < k; ++j) {
                T* row = col + ((c * k + i) * k + j) * M;
                for (i64 hm = 0; hm < Hm; ++hm) {
                    const i64 sh = hm * stride - pad + i;
                    T* out = row + hm * Wm;
                    if (sh < 0 || sh >= Hs) {
                        std::fill(out, out + Wm, T(0));
                        continue;
                    }
                    const T* in = plane + sh * Ws;
                    if (stride == 1) {
                        const i64 sw0 = -pad + j;
                        for (i64 wm = 0; wm < Wm; ++wm) {
                            const i64 sw = sw0 + wm;
                            out[wm] = (sw >= 0 && sw < Ws) ? in[sw] : T(0);
                        }
                    } else {
                        for (i64 wm = 0; wm < Wm; ++wm) {
                            const i64 sw = wm * stride - pad + j;
                            out[wm] = (sw >= 0 && sw < Ws) ? in[sw] : T(0);
                        }
                    }
                }
            }
    }
}

// Transpose of im2col: dst[c, hm*s - p + i, wm*s - p + j] += col[(c,i,j), m].
template <typename T>
void col2im(const T* col, i64 C, i64 Ht, i64 Wt, i64 k, i64 stride, i64 pad, i64 Hm, i64 Wm, T* dst) {
    const i64 M = Hm * Wm;
    for (i64 c = 0; c < C; ++c) {
        T* plane = dst + c * Ht * Wt;
        for (i64 i = 0; i < k; ++i)
            for (i64 j = 0; j < k; ++j) {
                const T* row = col + ((c * k + i) * k + j) * M;
                for (i64 hm = 0; hm < Hm; ++hm) {
                    const i64 th = hm * stride - pad + i;
                    if (th < 0 || th >= Ht) continue;
                    T* out = plane + th * Wt;
                    const T* in = row + hm * Wm;
                    for (i64 wm = 0; wm < Wm; ++wm) {
                        const i64 tw = wm * stride - pad + j;
                        if (tw >= 0 && tw < Wt) out[tw] += in[wm];
                    }
                }
            }
    }
}

template <typename T>
std::vector<T>& scratch(int slot) {
    thread_local std::vector<T> bufs[4];
    return bufs[slot];
}

struct ConvGeom {
    i64 Cin, Cout, k, stride, pad, groups, Hin, Win, Ho, Wo;
};

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* b, const ConvGeom& g, i64 N, T* y) {
    const i64 M = g.Ho * g.Wo;
    const i64 cin_g = g.Cin / g.groups, cout_g = g.Cout / g.groups;
    const i64 K = cin_g * g.k * g.k;
    const bool depthwise = (g.groups == g.Cin && cout_g == 1 && cin_g == 1);
    const bool pointwise = (g.k == 1 && g.stride == 1 && g.pad == 0);
    for (i64 n = 0; n < N; ++n) {
        const T* xn = x + n * g.Cin * g.Hin * g.Win;
        T* yn = y + n * g.Cout * M;
        if (depthwise) {
            for (i64 c = 0; c < g.Cin; ++c) {
                const T* plane = xn + c * g.Hin * g.Win;
                const T* ker = w + c * g.k * g.k;
                T* out = yn + c * M;
                for (i64 ho = 0; ho < g.Ho; ++ho)
                    for (i64 wo = 0; wo < g.Wo; ++wo) {
                        T acc = 0;
                        for (i64 i = 0; i < g.k; ++i) {
                            const i64 sh = ho * g.stride - g.pad + i;
                            if (sh < 0 || sh >= g.Hin) continue;
                            const T* in = plane + sh * g.Win;
                            for (i64 j = 0; j < g.k; ++j) {
                                const i64 sw = wo * g.stride - g.pad + j;
                                if (sw >= 0 && sw < g.Win) acc += ker[i * g.k + j] * in[sw];
                            }
                        }
                        out[ho * g.Wo + wo] = acc;
                    }
            }
        } else if (pointwise && g.groups == 1) {
            blas_gemm(false, false, g.Cout, M, g.Cin, T(1), w, g.Cin, xn, M, T(0), yn, M);
        } else if (pointwise) {
            for (i64 gi = 0; gi < g.groups; ++gi)
                blas_gemm(false, false, cout_g, M, cin_g, T(1), w + gi * cout_g * K, K, xn + gi * cin_g * M, M, T(0),
                          yn + gi * cout_g * M, M);
        } else {
            auto& col = scratch<T>(0);
            col.resize(static_cast<size_t>(g.Cin * g.k * g.k * M));
            im2col(xn, g.Cin, g.Hin, g.Win, g.k, g.stride, g.pad, g.Ho, g.Wo, col.data());
            for (i64 gi = 0; gi < g.groups; ++gi)
                blas_gemm(false, false, cout_g, M, K, T(1), w + gi * cout_g * K, K, col.data() + gi * K * M, M, T(0),
                          yn + gi * cout_g * M, M);
        }
        if (b)
            for (i64 c = 0; c < g.Cout; ++c) {
                T* out = yn + c * M;
                const T bv = b[c];
                for (i64 m = 0; m < M; ++m) out[m] += bv;
            }
    }
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, i64 stride, i64 pad, i64 groups) {
    const Shape xs = x.shape();
    const Shape ws = weight.shape();
    ConvGeom g{xs.c, ws.n, ws.h, stride, pad, groups, xs.h, xs.w, 0, 0};
    if (ws.h != ws.w) throw ShapeError("conv2d: non-square kernel");
    if (xs.c % groups != 0 || ws.n % groups != 0 || ws.c != xs.c / groups)
        throw ShapeError("conv2d: channel/group mismatch x=" + xs.str() + " w=" + ws.str());
    if (bias.defined() && bias.shape().numel() != ws.n) throw ShapeError("conv2d: bias size mismatch");
    g.Ho = conv_out_dim(xs.h, g.k, stride, pad);
    g.Wo = conv_out_dim(xs.w, g.k, stride, pad);
    if (g.Ho < 1 || g.Wo < 1) throw ShapeError("conv2d: output would be empty");

    Tensor<T> out(Shape{xs.n, g.Cout, g.Ho, g.Wo});
    conv2d_forward(x.value().data(), weight.value().data(), bias.defined() ? bias.value().data() : nullptr, g, xs.n,
                   out.data());

    auto xn = x.n;
    auto wn = weight.n;
    auto bn = bias.defined() ? bias.n : nullptr;
    std::vector<Var<T>> inputs = bias.defined() ? std::vector<Var<T>>{x, weight, bias} : std::vector<Var<T>>{x, weight};
    return make_op<T>(
        std::move(out), inputs,
        [xn, wn, bn, g](Node<T>& self) {
            const i64 N = xn->value.shape().n;
            const i64 M = g.Ho * g.Wo;
            const i64 cin_g = g.Cin / g.groups, cout_g = g.Cout / g.groups;
            const i64 K = cin_g * g.k * g.k;
            const T* dy = self.grad.data();
            const bool depthwise = (g.groups == g.Cin && cout_g == 1 && cin_g == 1);
            const bool pointwise = (g.k == 1 && g.stride == 1 && g.pad == 0);

            Tensor<T> dw, dx;
            if (wn->requires_grad) dw = Tensor<T>(wn->value.shape());
            if (xn->requires_grad) dx = Tensor<T>(xn->value.shape());

            for (i64 n = 0; n < N; ++n) {
                const T* xp = xn->value.data() + n * g.Cin * g.Hin * g.Win;
                const T* dyn = dy + n * g.Cout * M;
                if (depthwise) {
                    for (i64 c = 0; c < g.Cin; ++c) {
                        const T* dyp = dyn + c * M;
                        const T* ker = wn->value.data() + c * g.k * g.k;
                        const T* plane = xp + c * g.Hin * g.Win;
                        T* dwp = wn->requires_grad ? dw.data() + c * g.k * g.k : nullptr;
                        T* dxp = xn->requires_grad ? dx.data() + (n * g.Cin + c) * g.Hin * g.Win : nullptr;
                        for (i64 ho = 0; ho < g.Ho; ++ho)
                            for (i64 wo = 0; wo < g.Wo; ++wo) {
                                const T gv = dyp[ho * g.Wo + wo];
                                if (gv == T(0)) continue;
                                for (i64 i = 0; i < g.k; ++i) {
                                    const i64 sh = ho * g.stride - g.pad + i;
                                    if (sh < 0 || sh >= g.Hin) continue;
                                    for (i64 j = 0; j < g.k; ++j) {
                                        const i64 sw = wo * g.stride - g.pad + j;
                                        if (sw < 0 || sw >= g.Win) continue;
                                        if (dwp) dwp[i * g.k + j] += gv * plane[sh * g.Win + sw];
                                        if (dxp) dxp[sh * g.Win + sw] += gv * ker[i * g.k + j];
                                    }
                                }
                            }
                    }
                } else if (pointwise) {
                    for (i64 gi = 0; gi < g.groups; ++gi) {
                        if (wn->requires_grad)
                            blas_gemm(false, true, cout_g, cin_g, M, T(1), dyn + gi * cout_g * M, M,
                                      xp + gi * cin_g * M, M, T(1), dw.data() + gi * cout_g * K, K);
                        if (xn->requires_grad)
                            blas_gemm(true, false, cin_g, M, cout_g, T(1), wn->value.data() + gi * cout_g * K, K,
                                      dyn + gi * cout_g * M, M, T(1),
                                      dx.data() + n * g.Cin * M + gi * cin_g * M, M);
                    }
                } else {
                    auto& col = scratch<T>(0);
                    col.resize(static_cast<size_t>(g.Cin * g.k * g.k * M));
                    im2col(xp, g.Cin, g.Hin, g.Win, g.k, g.stride, g.pad, g.Ho, g.Wo, col.data());
                    if (wn->requires_grad)
                        for (i64 gi = 0; gi < g.groups; ++gi)
                            blas_gemm(false, true, cout_g, K, M, T(1), dyn + gi * cout_g * M, M,
                                      col.data() + gi * K * M, M, T(1), dw.data() + gi * cout_g * K, K);
                    if (xn->requires_grad) {
                        auto& colg = scratch<T>(1);
                        colg.resize(static_cast<size_t>(g.Cin * g.k * g.k * M));
                        for (i64 gi = 0; gi < g.groups; ++gi)
                            blas_gemm(true, false, K, M, cout_g, T(1), wn->value.data() + gi * cout_g * K, K,
                                      dyn + gi * cout_g * M, M, T(0), colg.data() + gi * K * M, M);
                        col2im(colg.data(), g.Cin, g.Hin, g.Win, g.k, g.stride, g.pad, g.Ho, g.Wo,
                               dx.data() + n * g.Cin * g.Hin * g.Win);
                    }
                }
            }
            if (wn->requires_grad) accumulate_grad(*wn, dw);
            if (xn->requires_grad) accumulate_grad(*xn, dx);
            if (bn && bn->requires_grad) {
                Tensor<T> db(bn->value.shape());
                for (i64 n = 0; n < N; ++n)
                    for (i64 c = 0; c < g.Cout; ++c) {
                        const T* dyp = dy + (n * g.Cout + c) * M;
                        double acc = 0;
                        for (i64 m = 0; m < M; ++m) acc += static_cast<double>(dyp[m]);
                        db[c] += static_cast<T>(acc);
                    }
                accumulate_grad(*bn, db);
            }
        },
        "conv2d");
}

template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, i64 stride, i64 pad, i64 out_pad) {
    const Shape xs = x.shape();
    const Shape ws = weight.shape();  // (Cin, Cout, k, k)
    if (ws.h != ws.w) throw ShapeError("conv_transpose2d: non-square kernel");
    if (ws.n != xs.c) throw ShapeError("conv_transpose2d: channel mismatch x=" + xs.str() + " w=" + ws.str());
    const i64 Cin = xs.c, Cout = ws.c, k = ws.h;
    const i64 Ho = convt_out_dim(xs.h, k, stride, pad, out_pad);
    const i64 Wo = convt_out_dim(xs.w, k, stride, pad, out_pad);
    if (Ho < 1 || Wo < 1) throw ShapeError("conv_transpose2d: output would be empty");
    const i64 M = xs.h * xs.w;
    const i64 CK = Cout * k * k;

    Tensor<T> out(Shape{xs.n, Cout, Ho, Wo});
    for (i64 n = 0; n < xs.n; ++n) {
        const T* xp = x.value().data() + n * Cin * M;
        auto& col = scratch<T>(0);
        col.resize(static_cast<size_t>(CK * M));
        blas_gemm(true, false, CK, M, Cin, T(1), weight.value().data(), CK, xp, M, T(0), col.data(), M);
        col2im(col.data(), Cout, Ho, Wo, k, stride, pad, xs.h, xs.w, out.data() + n * Cout * Ho * Wo);
        if (bias.defined()) {
            T* yn = out.data() + n * Cout * Ho * Wo;
            for (i64 c = 0; c < Cout; ++c) {
                const T bv = bias.value()[c];
                T* p = yn + c * Ho * Wo;
                for (i64 m = 0; m < Ho * Wo; ++m) p[m] += bv;
            }
        }
    }

    auto xn = x.n;
    auto wn = weight.n;
    auto bn = bias.defined() ? bias.n : nullptr;
    std::vector<Var<T>> inputs = bias.defined() ? std::vector<Var<T>>{x, weight, bias} : std::vector<Var<T>>{x, weight};
    return make_op<T>(
        std::move(out), inputs,
        [xn, wn, bn, stride, pad, k, Cin, Cout, Ho, Wo](Node<T>& self) {
            const Shape xs = xn->value.shape();
            const i64 N = xs.n;
            const i64 M = xs.h * xs.w;
            const i64 CK = Cout * k * k;
            Tensor<T> dw, dx;
            if (wn->requires_grad) dw = Tensor<T>(wn->value.shape());
            if (xn->requires_grad) dx = Tensor<T>(xn->value.shape());
            for (i64 n = 0; n < N; ++n) {
                const T* dyp = self.grad.data() + n * Cout * Ho * Wo;
                auto& dcol = scratch<T>(1);
                dcol.resize(static_cast<size_t>(CK * M));
                im2col(dyp, Cout, Ho, Wo, k, stride, pad, xs.h, xs.w, dcol.data());
                if (xn->requires_grad)
                    blas_gemm(false, false, Cin, M, CK, T(1), wn->value.data(), CK, dcol.data(), M, T(1),
                              dx.data() + n * Cin * M, M);
                if (wn->requires_grad)
                    blas_gemm(false, true, Cin, CK, M, T(1), xn->value.data() + n * Cin * M, M, dcol.data(), M, T(1),
                              dw.data(), CK);
            }
            if (wn->requires_grad) accumulate_grad(*wn, dw);
            if (xn->requires_grad) accumulate_grad(*xn, dx);
            if (bn && bn->requires_grad) {
                Tensor<T> db(bn->value.shape());
                for (i64 n = 0; n < N; ++n)
                    for (i64 c = 0; c < Cout; ++c) {
                        const T* p = self.grad.data() + (n * Cout + c) * Ho * Wo;
                        double acc = 0;
                        for (i64 m = 0; m < Ho * Wo; ++m) acc += static_cast<double>(p[m]);
                        db[c] += static_cast<T>(acc);
                    }
                accumulate_grad(*bn, db);
            }
        },
        "conv_transpose2d");
}

template Var<float> conv2d(const Var<float>&, const Var<float>&, const Var<float>&, i64, i64, i64);
template Var<double> conv2d(const Var<double>&, const Var<double>&, const Var<double>&, i64, i64, i64);
template Var<float> conv_transpose2d(const Var<float>&, const Var<float>&, const Var<float>&, i64, i64, i64);
template Var<double> conv_transpose2d(const Var<double>&, const Var<double>&, const Var<double>&, i64, i64, i64);

}  // namespace s2c
