#include "s2c/ops.hpp"

namespace s2c {

namespace {

// Edge-inclusive mirror index with period 2n; valid for any offset.
inline i64 fold_symmetric(i64 i, i64 n) {
    const i64 p = 2 * n;
    i64 m = i % p;
    if (m < 0) m += p;
    return m < n ? m : p - 1 - m;
}

}  // namespace

template <typename T>
Var<T> pad_symmetric(const Var<T>& x, i64 top, i64 bottom, i64 left, i64 right) {
    const Shape s = x.shape();
    Tensor<T> out(Shape{s.n, s.c, s.h + top + bottom, s.w + left + right});
    const Shape os = out.shape();
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c)
            for (i64 h = 0; h < os.h; ++h) {
                const i64 sh = fold_symmetric(h - top, s.h);
                for (i64 w = 0; w < os.w; ++w) out.at(n, c, h, w) = x.value().at(n, c, sh, fold_symmetric(w - left, s.w));
            }
    auto xn = x.n;
    return make_op<T>(
        std::move(out), {x},
        [xn, top, left](Node<T>& self) {
            if (!xn->requires_grad) return;
            const Shape s = xn->value.shape();
            const Shape os = self.grad.shape();
            Tensor<T> gx(s);
            for (i64 n = 0; n < s.n; ++n)
                for (i64 c = 0; c < s.c; ++c)
                    for (i64 h = 0; h < os.h; ++h) {
                        const i64 sh = fold_symmetric(h - top, s.h);
                        for (i64 w = 0; w < os.w; ++w)
                            gx.at(n, c, sh, fold_symmetric(w - left, s.w)) += self.grad.at(n, c, h, w);
                    }
            accumulate_grad(*xn, gx);
        },
        "pad_symmetric");
}

template <typename T>
Var<T> crop(const Var<T>& x, i64 h0, i64 hlen, i64 w0, i64 wlen) {
    const Shape s = x.shape();
    if (h0 < 0 || w0 < 0 || h0 + hlen > s.h || w0 + wlen > s.w) throw ShapeError("crop: window out of bounds");
    Tensor<T> out(Shape{s.n, s.c, hlen, wlen});
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c)
            for (i64 h = 0; h < hlen; ++h) {
                const T* src = &x.value().at(n, c, h0 + h, w0);
                T* dst = &out.at(n, c, h, 0);
                std::copy(src, src + wlen, dst);
            }
    auto xn = x.n;
    return make_op<T>(
        std::move(out), {x},
        [xn, h0, w0, hlen, wlen](Node<T>& self) {
            if (!xn->requires_grad) return;
            const Shape s = xn->value.shape();
            Tensor<T> gx(s);
            for (i64 n = 0; n < s.n; ++n)
                for (i64 c = 0; c < s.c; ++c)
                    for (i64 h = 0; h < hlen; ++h)
                        for (i64 w = 0; w < wlen; ++w) gx.at(n, c, h0 + h, w0 + w) = self.grad.at(n, c, h, w);
            accumulate_grad(*xn, gx);
        },
        "crop");
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, i64 c0, i64 clen) {
    const Shape s = x.shape();
    if (c0 < 0 || c0 + clen > s.c) throw ShapeError("slice_channels: out of bounds");
    Tensor<T> out(Shape{s.n, clen, s.h, s.w});
    const i64 hw = s.h * s.w;
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < clen; ++c) {
            const T* src = x.value().data() + (n * s.c + c0 + c) * hw;
            std::copy(src, src + hw, out.data() + (n * clen + c) * hw);
        }
    auto xn = x.n;
    return make_op<T>(
        std::move(out), {x},
        [xn, c0, clen](Node<T>& self) {
            if (!xn->requires_grad) return;
            const Shape s = xn->value.shape();
            const i64 hw = s.h * s.w;
            Tensor<T> gx(s);
            for (i64 n = 0; n < s.n; ++n)
                for (i64 c = 0; c < clen; ++c) {
                    const T* src = self.grad.data() + (n * clen + c) * hw;
                    std::copy(src, src + hw, gx.data() + (n * s.c + c0 + c) * hw);
                }
            accumulate_grad(*xn, gx);
        },
        "slice_channels");
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw ShapeError("concat_channels: no inputs");
    const Shape s0 = xs[0].shape();
    i64 ctotal = 0;
    for (const auto& x : xs) {
        const Shape s = x.shape();
        if (s.n != s0.n || s.h != s0.h || s.w != s0.w) throw ShapeError("concat_channels: spatial/batch mismatch");
        ctotal += s.c;
    }
    Tensor<T> out(Shape{s0.n, ctotal, s0.h, s0.w});
    const i64 hw = s0.h * s0.w;
    std::vector<i64> offsets;
    i64 off = 0;
    for (const auto& x : xs) {
        offsets.push_back(off);
        const i64 ci = x.shape().c;
        for (i64 n = 0; n < s0.n; ++n)
            for (i64 c = 0; c < ci; ++c) {
                const T* src = x.value().data() + (n * ci + c) * hw;
                std::copy(src, src + hw, out.data() + (n * ctotal + off + c) * hw);
            }
        off += ci;
    }
    std::vector<std::shared_ptr<Node<T>>> nodes;
    for (const auto& x : xs) nodes.push_back(x.n);
    return make_op<T>(
        std::move(out), xs,
        [nodes, offsets, ctotal](Node<T>& self) {
            const Shape os = self.grad.shape();
            const i64 hw = os.h * os.w;
            for (size_t k = 0; k < nodes.size(); ++k) {
                auto& xn = *nodes[k];
                if (!xn.requires_grad) continue;
                const i64 ci = xn.value.shape().c;
                Tensor<T> gx(xn.value.shape());
                for (i64 n = 0; n < os.n; ++n)
                    for (i64 c = 0; c < ci; ++c) {
                        const T* src = self.grad.data() + (n * ctotal + offsets[k] + c) * hw;
                        std::copy(src, src + hw, gx.data() + (n * ci + c) * hw);
                    }
                accumulate_grad(xn, gx);
            }
        },
        "concat_channels");
}

template <typename T>
Var<T> avg_pool2(const Var<T>& x) {
    const Shape s = x.shape();
    const i64 ho = s.h / 2, wo = s.w / 2;
    if (ho < 1 || wo < 1) throw ShapeError("avg_pool2: input too small");
    Tensor<T> out(Shape{s.n, s.c, ho, wo});
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c)
            for (i64 h = 0; h < ho; ++h)
                for (i64 w = 0; w < wo; ++w)
                    out.at(n, c, h, w) = static_cast<T>(0.25) * (x.value().at(n, c, 2 * h, 2 * w) + x.value().at(n, c, 2 * h, 2 * w + 1) +
                                                                 x.value().at(n, c, 2 * h + 1, 2 * w) + x.value().at(n, c, 2 * h + 1, 2 * w + 1));
    auto xn = x.n;
    return make_op<T>(
        std::move(out), {x},
        [xn](Node<T>& self) {
            if (!xn->requires_grad) return;
            const Shape s = xn->value.shape();
            const Shape os = self.grad.shape();
            Tensor<T> gx(s);
            for (i64 n = 0; n < os.n; ++n)
                for (i64 c = 0; c < os.c; ++c)
                    for (i64 h = 0; h < os.h; ++h)
                        for (i64 w = 0; w < os.w; ++w) {
                            const T g = static_cast<T>(0.25) * self.grad.at(n, c, h, w);
                            gx.at(n, c, 2 * h, 2 * w) += g;
                            gx.at(n, c, 2 * h, 2 * w + 1) += g;
                            gx.at(n, c, 2 * h + 1, 2 * w) += g;
                            gx.at(n, c, 2 * h + 1, 2 * w + 1) += g;
                        }
            accumulate_grad(*xn, gx);
        },
        "avg_pool2");
}

#define S2C_INSTANTIATE(T)                                                               \
    template Var<T> pad_symmetric(const Var<T>&, i64, i64, i64, i64);                    \
    template Var<T> crop(const Var<T>&, i64, i64, i64, i64);                             \
    template Var<T> slice_channels(const Var<T>&, i64, i64);                             \
    template Var<T> concat_channels(const std::vector<Var<T>>&);                         \
    template Var<T> avg_pool2(const Var<T>&);

S2C_INSTANTIATE(float)
S2C_INSTANTIATE(double)
#undef S2C_INSTANTIATE

}  // namespace s2c
