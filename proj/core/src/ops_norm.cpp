#include <cmath>

#include "s2c/ops.hpp"

namespace s2c {

template <typename T>
Var<T> layer_norm_chan(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps) {
    const Shape s = x.shape();
    if (gamma.shape().numel() != s.c || beta.shape().numel() != s.c)
        throw ShapeError("layer_norm_chan: affine size mismatch for " + s.str());
    Tensor<T> out(s);
    Tensor<T> mu(Shape{s.n, 1, s.h, s.w});
    Tensor<T> rstd(Shape{s.n, 1, s.h, s.w});
    const i64 hw = s.h * s.w;
    const T* xp = x.value().data();
    const T* gp = gamma.value().data();
    const T* bp = beta.value().data();
    for (i64 n = 0; n < s.n; ++n)
        for (i64 p = 0; p < hw; ++p) {
            const T* col = xp + n * s.c * hw + p;
            double m = 0;
            for (i64 c = 0; c < s.c; ++c) m += static_cast<double>(col[c * hw]);
            m /= static_cast<double>(s.c);
            double v = 0;
            for (i64 c = 0; c < s.c; ++c) {
                const double d = static_cast<double>(col[c * hw]) - m;
                v += d * d;
            }
            v /= static_cast<double>(s.c);
            const T rs = static_cast<T>(1.0 / std::sqrt(v + eps));
            mu[n * hw + p] = static_cast<T>(m);
            rstd[n * hw + p] = rs;
            T* oc = out.data() + n * s.c * hw + p;
            for (i64 c = 0; c < s.c; ++c) {
                const T xh = (col[c * hw] - static_cast<T>(m)) * rs;
                oc[c * hw] = gp[c] * xh + bp[c];
            }
        }

    auto xn = x.n;
    auto gn = gamma.n;
    auto bn = beta.n;
    return make_op<T>(
        std::move(out), {x, gamma, beta},
        [xn, gn, bn, mu = std::move(mu), rstd = std::move(rstd)](Node<T>& self) {
            const Shape s = xn->value.shape();
            const i64 hw = s.h * s.w;
            const T* xp = xn->value.data();
            const T* gp = gn->value.data();
            const T* g = self.grad.data();
            Tensor<T> dx, dgamma, dbeta;
            if (xn->requires_grad) dx = Tensor<T>(s);
            if (gn->requires_grad) dgamma = Tensor<T>(gn->value.shape());
            if (bn->requires_grad) dbeta = Tensor<T>(bn->value.shape());
            for (i64 n = 0; n < s.n; ++n)
                for (i64 p = 0; p < hw; ++p) {
                    const T m = mu[n * hw + p];
                    const T rs = rstd[n * hw + p];
                    const T* col = xp + n * s.c * hw + p;
                    const T* gc = g + n * s.c * hw + p;
                    double sum_dxh = 0, sum_dxh_xh = 0;
                    for (i64 c = 0; c < s.c; ++c) {
                        const T xh = (col[c * hw] - m) * rs;
                        const T dxh = gc[c * hw] * gp[c];
                        sum_dxh += static_cast<double>(dxh);
                        sum_dxh_xh += static_cast<double>(dxh) * static_cast<double>(xh);
                        if (dgamma.defined()) dgamma[c] += gc[c * hw] * xh;
                        if (dbeta.defined()) dbeta[c] += gc[c * hw];
                    }
                    if (dx.defined()) {
                        const double inv_c = 1.0 / static_cast<double>(s.c);
                        T* dxc = dx.data() + n * s.c * hw + p;
                        for (i64 c = 0; c < s.c; ++c) {
                            const T xh = (col[c * hw] - m) * rs;
                            const double dxh = static_cast<double>(gc[c * hw]) * static_cast<double>(gp[c]);
                            dxc[c * hw] = static_cast<T>(
                                static_cast<double>(rs) * (dxh - inv_c * sum_dxh - static_cast<double>(xh) * inv_c * sum_dxh_xh));
                        }
                    }
                }
            if (dx.defined()) accumulate_grad(*xn, dx);
            if (dgamma.defined()) accumulate_grad(*gn, dgamma);
            if (dbeta.defined()) accumulate_grad(*bn, dbeta);
        },
        "layer_norm_chan");
}

template Var<float> layer_norm_chan(const Var<float>&, const Var<float>&, const Var<float>&, double);
template Var<double> layer_norm_chan(const Var<double>&, const Var<double>&, const Var<double>&, double);

}  // namespace s2c
