#include <cmath>

#include "s2c/ops.hpp"

namespace s2c {

namespace {

enum class BcKind { same, channel, scalar };

template <typename T>
BcKind bc_kind(const Shape& a, const Shape& b) {
    if (a == b) return BcKind::same;
    if (b.n == 1 && b.h == 1 && b.w == 1 && b.c == 1) return BcKind::scalar;
    if (b.n == 1 && b.h == 1 && b.w == 1 && b.c == a.c) return BcKind::channel;
    throw ShapeError("broadcast: incompatible shapes " + a.str() + " vs " + b.str());
}

// Reduce a full-shaped gradient onto a broadcast operand's shape.
template <typename T>
Tensor<T> reduce_to(const Tensor<T>& g, const Shape& target, BcKind kind) {
    if (kind == BcKind::same) return g;
    Tensor<T> out(target);
    const Shape s = g.shape();
    if (kind == BcKind::scalar) {
        double acc = 0;
        for (i64 i = 0; i < g.numel(); ++i) acc += static_cast<double>(g[i]);
        out[0] = static_cast<T>(acc);
        return out;
    }
    const i64 hw = s.h * s.w;
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c) {
            const T* gp = g.data() + (n * s.c + c) * hw;
            double acc = 0;
            for (i64 i = 0; i < hw; ++i) acc += static_cast<double>(gp[i]);
            out[c] += static_cast<T>(acc);
        }
    return out;
}

template <typename T, class FwdFn, class DaFn, class DbFn>
Var<T> binary_op(const Var<T>& a, const Var<T>& b, FwdFn f, DaFn da, DbFn db, const char* name) {
    const BcKind kind = bc_kind<T>(a.shape(), b.shape());
    const Shape s = a.shape();
    Tensor<T> out(s);
    const T* ap = a.value().data();
    const T* bp = b.value().data();
    T* op = out.data();
    const i64 hw = s.h * s.w;
    if (kind == BcKind::same) {
        for (i64 i = 0; i < s.numel(); ++i) op[i] = f(ap[i], bp[i]);
    } else if (kind == BcKind::scalar) {
        const T bv = bp[0];
        for (i64 i = 0; i < s.numel(); ++i) op[i] = f(ap[i], bv);
    } else {
        for (i64 n = 0; n < s.n; ++n)
            for (i64 c = 0; c < s.c; ++c) {
                const T bv = bp[c];
                const i64 base = (n * s.c + c) * hw;
                for (i64 i = 0; i < hw; ++i) op[base + i] = f(ap[base + i], bv);
            }
    }
    auto an = a.n;
    auto bn = b.n;
    return make_op<T>(
        std::move(out), {a, b},
        [an, bn, kind, da, db](Node<T>& self) {
            const Shape s = self.grad.shape();
            const i64 hw = s.h * s.w;
            const T* g = self.grad.data();
            const T* av = an->value.data();
            const T* bv = bn->value.data();
            auto bval = [&](i64 i, i64 c) -> T {
                switch (kind) {
                    case BcKind::same: return bv[i];
                    case BcKind::scalar: return bv[0];
                    default: return bv[c];
                }
            };
            if (an->requires_grad) {
                Tensor<T> ga(s);
                T* gp = ga.data();
                for (i64 n = 0; n < s.n; ++n)
                    for (i64 c = 0; c < s.c; ++c) {
                        const i64 base = (n * s.c + c) * hw;
                        for (i64 i = 0; i < hw; ++i)
                            gp[base + i] = g[base + i] * da(av[base + i], bval(base + i, c));
                    }
                accumulate_grad(*an, ga);
            }
            if (bn->requires_grad) {
                Tensor<T> gb(s);
                T* gp = gb.data();
                for (i64 n = 0; n < s.n; ++n)
                    for (i64 c = 0; c < s.c; ++c) {
                        const i64 base = (n * s.c + c) * hw;
                        for (i64 i = 0; i < hw; ++i)
                            gp[base + i] = g[base + i] * db(av[base + i], bval(base + i, c));
                    }
                accumulate_grad(*bn, reduce_to(gb, bn->value.shape(), kind));
            }
        },
        name);
}

template <typename T, class FwdFn, class DFn>
Var<T> unary_op(const Var<T>& x, FwdFn f, DFn dfdx, const char* name) {
    Tensor<T> out(x.shape());
    const T* xp = x.value().data();
    T* op = out.data();
    for (i64 i = 0; i < out.numel(); ++i) op[i] = f(xp[i]);
    auto xn = x.n;
    return make_op<T>(
        std::move(out), {x},
        [xn, dfdx](Node<T>& self) {
            if (!xn->requires_grad) return;
            const T* g = self.grad.data();
            const T* xv = xn->value.data();
            Tensor<T> gx(self.grad.shape());
            T* gp = gx.data();
            for (i64 i = 0; i < gx.numel(); ++i) gp[i] = g[i] * dfdx(xv[i]);
            accumulate_grad(*xn, gx);
        },
        name);
}

template <typename T>
T sigmoid_scalar(T x) {
    return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

// tanh-form GELU; gelu(0)=0 exactly.
template <typename T>
T gelu_scalar(T x) {
    const T k = T(0.7978845608028654);  // sqrt(2/pi)
    const T inner = k * (x + T(0.044715) * x * x * x);
    return T(0.5) * x * (T(1) + std::tanh(inner));
}

template <typename T>
T gelu_grad_scalar(T x) {
    const T k = T(0.7978845608028654);
    const T inner = k * (x + T(0.044715) * x * x * x);
    const T th = std::tanh(inner);
    const T sech2 = T(1) - th * th;
    return T(0.5) * (T(1) + th) + T(0.5) * x * sech2 * k * (T(1) + T(0.134145) * x * x);
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    return binary_op<T>(
        a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); }, "add");
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    return binary_op<T>(
        a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); }, "sub");
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    return binary_op<T>(
        a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; }, "mul");
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
    return binary_op<T>(
        a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
        [](T x, T y) { return -x / (y * y); }, "div");
}

template <typename T>
Var<T> scale(const Var<T>& a, double s) {
    const T sv = static_cast<T>(s);
    return unary_op<T>(
        a, [sv](T x) { return x * sv; }, [sv](T) { return sv; }, "scale");
}

template <typename T>
Var<T> add_const(const Var<T>& a, double v) {
    const T vv = static_cast<T>(v);
    return unary_op<T>(
        a, [vv](T x) { return x + vv; }, [](T) { return T(1); }, "add_const");
}

template <typename T>
Var<T> gelu(const Var<T>& x) {
    return unary_op<T>(x, gelu_scalar<T>, gelu_grad_scalar<T>, "gelu");
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
    return unary_op<T>(
        x, sigmoid_scalar<T>,
        [](T v) {
            const T s = sigmoid_scalar(v);
            return s * (T(1) - s);
        },
        "sigmoid");
}

template <typename T>
Var<T> silu(const Var<T>& x) {
    return unary_op<T>(
        x, [](T v) { return v * sigmoid_scalar(v); },
        [](T v) {
            const T s = sigmoid_scalar(v);
            return s + v * s * (T(1) - s);
        },
        "silu");
}

template <typename T>
Var<T> tanh_op(const Var<T>& x) {
    return unary_op<T>(
        x, [](T v) { return std::tanh(v); },
        [](T v) {
            const T t = std::tanh(v);
            return T(1) - t * t;
        },
        "tanh");
}

template <typename T>
Var<T> softplus(const Var<T>& x) {
    return unary_op<T>(
        x, [](T v) { return v > T(30) ? v : std::log1p(std::exp(v)); },
        [](T v) { return sigmoid_scalar(v); }, "softplus");
}

template <typename T>
Var<T> erf_op(const Var<T>& x) {
    const T two_over_sqrt_pi = T(1.1283791670955126);
    return unary_op<T>(
        x, [](T v) { return std::erf(v); },
        [two_over_sqrt_pi](T v) { return two_over_sqrt_pi * std::exp(-v * v); }, "erf");
}

template <typename T>
Var<T> exp_op(const Var<T>& x) {
    Tensor<T> out(x.shape());
    const T* xp = x.value().data();
    T* op = out.data();
    for (i64 i = 0; i < out.numel(); ++i) op[i] = std::exp(xp[i]);
    auto xn = x.n;
    return make_op<T>(
        std::move(out), {x},
        [xn](Node<T>& self) {
            if (!xn->requires_grad) return;
            const T* g = self.grad.data();
            const T* yv = self.value.data();
            Tensor<T> gx(self.grad.shape());
            for (i64 i = 0; i < gx.numel(); ++i) gx[i] = g[i] * yv[i];
            accumulate_grad(*xn, gx);
        },
        "exp");
}

template <typename T>
Var<T> log_op(const Var<T>& x) {
    return unary_op<T>(
        x, [](T v) { return std::log(v); }, [](T v) { return T(1) / v; }, "log");
}

template <typename T>
Var<T> abs_op(const Var<T>& x) {
    return unary_op<T>(
        x, [](T v) { return std::abs(v); },
        [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); }, "abs");
}

template <typename T>
Var<T> square(const Var<T>& x) {
    return unary_op<T>(
        x, [](T v) { return v * v; }, [](T v) { return T(2) * v; }, "square");
}

template <typename T>
Var<T> sqrt_op(const Var<T>& x) {
    return unary_op<T>(
        x, [](T v) { return std::sqrt(v); }, [](T v) { return T(0.5) / std::sqrt(v); }, "sqrt");
}

template <typename T>
Var<T> neg(const Var<T>& x) {
    return unary_op<T>(
        x, [](T v) { return -v; }, [](T) { return T(-1); }, "neg");
}

template <typename T>
Var<T> clamp_min(const Var<T>& x, double lo) {
    const T l = static_cast<T>(lo);
    return unary_op<T>(
        x, [l](T v) { return v < l ? l : v; }, [l](T v) { return v < l ? T(0) : T(1); }, "clamp_min");
}

template <typename T>
Var<T> pow_const(const Var<T>& x, double p) {
    const T pv = static_cast<T>(p);
    return unary_op<T>(
        x, [pv](T v) { return std::pow(v, pv); },
        [pv](T v) { return pv * std::pow(v, pv - T(1)); }, "pow_const");
}

template <typename T>
Var<T> sum_all(const Var<T>& x) {
    Tensor<T> out(Shape{1, 1, 1, 1});
    double acc = 0;
    const T* xp = x.value().data();
    for (i64 i = 0; i < x.value().numel(); ++i) acc += static_cast<double>(xp[i]);
    out[0] = static_cast<T>(acc);
    auto xn = x.n;
    return make_op<T>(
        std::move(out), {x},
        [xn](Node<T>& self) {
            if (!xn->requires_grad) return;
            Tensor<T> gx(xn->value.shape(), self.grad[0]);
            accumulate_grad(*xn, gx);
        },
        "sum_all");
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
    const double inv = 1.0 / static_cast<double>(x.value().numel());
    return scale(sum_all(x), inv);
}

template <typename T>
Var<T> ste_round(const Var<T>& x) {
    return unary_op<T>(
        x, [](T v) { return std::round(v); }, [](T) { return T(1); }, "ste_round");
}

template <typename T>
Var<T> add_uniform_noise(const Var<T>& x, Rng& rng) {
    Tensor<T> out(x.shape());
    std::uniform_real_distribution<double> d(-0.5, 0.5);
    const T* xp = x.value().data();
    for (i64 i = 0; i < out.numel(); ++i) out[i] = xp[i] + static_cast<T>(d(rng));
    auto xn = x.n;
    return make_op<T>(
        std::move(out), {x},
        [xn](Node<T>& self) {
            if (!xn->requires_grad) return;
            accumulate_grad(*xn, self.grad);
        },
        "add_noise");
}

template <typename T>
Var<T> constant(Tensor<T> t) {
    return Var<T>(std::move(t), false);
}

#define S2C_INSTANTIATE(T)                                            \
    template Var<T> add(const Var<T>&, const Var<T>&);                \
    template Var<T> sub(const Var<T>&, const Var<T>&);                \
    template Var<T> mul(const Var<T>&, const Var<T>&);                \
    template Var<T> div(const Var<T>&, const Var<T>&);                \
    template Var<T> scale(const Var<T>&, double);                     \
    template Var<T> add_const(const Var<T>&, double);                 \
    template Var<T> gelu(const Var<T>&);                              \
    template Var<T> sigmoid(const Var<T>&);                           \
    template Var<T> silu(const Var<T>&);                              \
    template Var<T> tanh_op(const Var<T>&);                           \
    template Var<T> softplus(const Var<T>&);                          \
    template Var<T> erf_op(const Var<T>&);                            \
    template Var<T> exp_op(const Var<T>&);                            \
    template Var<T> log_op(const Var<T>&);                            \
    template Var<T> abs_op(const Var<T>&);                            \
    template Var<T> square(const Var<T>&);                            \
    template Var<T> sqrt_op(const Var<T>&);                           \
    template Var<T> neg(const Var<T>&);                               \
    template Var<T> clamp_min(const Var<T>&, double);                 \
    template Var<T> pow_const(const Var<T>&, double);                 \
    template Var<T> sum_all(const Var<T>&);                           \
    template Var<T> mean_all(const Var<T>&);                          \
    template Var<T> ste_round(const Var<T>&);                         \
    template Var<T> add_uniform_noise(const Var<T>&, Rng&);           \
    template Var<T> constant(Tensor<T>);

S2C_INSTANTIATE(float)
S2C_INSTANTIATE(double)
#undef S2C_INSTANTIATE

}  // namespace s2c
