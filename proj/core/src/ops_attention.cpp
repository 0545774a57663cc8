#include <cmath>

#include "s2c/ops.hpp"

namespace s2c {

namespace {

// C(m,n) = A(m,k) * B(k,n), optionally accumulating.
template <typename T, bool Accum = false>
void mm_nn(const T* a, const T* b, T* c, i64 m, i64 n, i64 k) {
    for (i64 i = 0; i < m; ++i) {
        T* cr = c + i * n;
        if (!Accum)
            for (i64 j = 0; j < n; ++j) cr[j] = T(0);
        for (i64 p = 0; p < k; ++p) {
            const T av = a[i * k + p];
            const T* br = b + p * n;
            for (i64 j = 0; j < n; ++j) cr[j] += av * br[j];
        }
    }
}

// C(m,n) = A(m,k) * B(n,k)^T
template <typename T>
void mm_nt(const T* a, const T* b, T* c, i64 m, i64 n, i64 k) {
    for (i64 i = 0; i < m; ++i)
        for (i64 j = 0; j < n; ++j) {
            T acc = 0;
            const T* ar = a + i * k;
            const T* br = b + j * k;
            for (i64 p = 0; p < k; ++p) acc += ar[p] * br[p];
            c[i * n + j] = acc;
        }
}

// C(m,n) += A(k,m)^T * B(k,n)
template <typename T>
void mm_tn_accum(const T* a, const T* b, T* c, i64 m, i64 n, i64 k) {
    for (i64 p = 0; p < k; ++p) {
        const T* ar = a + p * m;
        const T* br = b + p * n;
        for (i64 i = 0; i < m; ++i) {
            const T av = ar[i];
            T* cr = c + i * n;
            for (i64 j = 0; j < n; ++j) cr[j] += av * br[j];
        }
    }
}

template <typename T>
void gather_window(const T* src, const Shape& s, i64 n, i64 c0, i64 d, i64 wy, i64 wx, i64 win, T* dst) {
    // dst (win*win, d): token-major rows, channel columns.
    const i64 hw = s.h * s.w;
    for (i64 e = 0; e < d; ++e) {
        const T* plane = src + (n * s.c + c0 + e) * hw;
        for (i64 dy = 0; dy < win; ++dy) {
            const T* row = plane + (wy * win + dy) * s.w + wx * win;
            for (i64 dx = 0; dx < win; ++dx) dst[(dy * win + dx) * d + e] = row[dx];
        }
    }
}

template <typename T>
void scatter_window_add(const T* src, const Shape& s, i64 n, i64 c0, i64 d, i64 wy, i64 wx, i64 win, T* dst) {
    const i64 hw = s.h * s.w;
    for (i64 e = 0; e < d; ++e) {
        T* plane = dst + (n * s.c + c0 + e) * hw;
        for (i64 dy = 0; dy < win; ++dy) {
            T* row = plane + (wy * win + dy) * s.w + wx * win;
            for (i64 dx = 0; dx < win; ++dx) row[dx] += src[(dy * win + dx) * d + e];
        }
    }
}

}  // namespace

template <typename T>
Var<T> window_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, i64 heads, i64 window) {
    const Shape s = q.shape();
    if (k.shape() != s || v.shape() != s) throw ShapeError("window_attention: q/k/v shape mismatch");
    if (s.c % heads != 0) throw ShapeError("window_attention: channels not divisible by heads");
    if (s.h % window != 0 || s.w % window != 0)
        throw ShapeError("window_attention: H,W must be padded to window multiples (got " + s.str() + ")");
    const i64 d = s.c / heads;
    const i64 nwh = s.h / window, nww = s.w / window;
    const i64 nt = window * window;
    const T att_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));

    Tensor<T> out(s);
    // Saved softmax weights, one (nt x nt) matrix per (n, window, head).
    Tensor<T> attn(Shape{s.n * nwh * nww * heads, 1, nt, nt});
    std::vector<T> qb(nt * d), kb(nt * d), vb(nt * d), ob(nt * d);

    i64 slot = 0;
    for (i64 n = 0; n < s.n; ++n)
        for (i64 wy = 0; wy < nwh; ++wy)
            for (i64 wx = 0; wx < nww; ++wx)
                for (i64 h = 0; h < heads; ++h, ++slot) {
                    gather_window(q.value().data(), s, n, h * d, d, wy, wx, window, qb.data());
                    gather_window(k.value().data(), s, n, h * d, d, wy, wx, window, kb.data());
                    gather_window(v.value().data(), s, n, h * d, d, wy, wx, window, vb.data());
                    T* a = attn.data() + slot * nt * nt;
                    mm_nt(qb.data(), kb.data(), a, nt, nt, d);
                    for (i64 i = 0; i < nt; ++i) {
                        T* row = a + i * nt;
                        T mx = row[0] * att_scale;
                        for (i64 j = 0; j < nt; ++j) {
                            row[j] *= att_scale;
                            mx = std::max(mx, row[j]);
                        }
                        T sum = 0;
                        for (i64 j = 0; j < nt; ++j) {
                            row[j] = std::exp(row[j] - mx);
                            sum += row[j];
                        }
                        const T inv = T(1) / sum;
                        for (i64 j = 0; j < nt; ++j) row[j] *= inv;
                    }
                    mm_nn(a, vb.data(), ob.data(), nt, d, nt);
                    scatter_window_add(ob.data(), s, n, h * d, d, wy, wx, window, out.data());
                }

    auto qn = q.n;
    auto kn = k.n;
    auto vn = v.n;
    return make_op<T>(
        std::move(out), {q, k, v},
        [qn, kn, vn, attn = std::move(attn), heads, window, att_scale](Node<T>& self) {
            const Shape s = qn->value.shape();
            const i64 d = s.c / heads;
            const i64 nwh = s.h / window, nww = s.w / window;
            const i64 nt = window * window;
            Tensor<T> dq, dk, dv;
            if (qn->requires_grad) dq = Tensor<T>(s);
            if (kn->requires_grad) dk = Tensor<T>(s);
            if (vn->requires_grad) dv = Tensor<T>(s);
            std::vector<T> qb(nt * d), kb(nt * d), vb(nt * d), gob(nt * d);
            std::vector<T> da(nt * nt), ds(nt * nt), buf(nt * d);
            i64 slot = 0;
            for (i64 n = 0; n < s.n; ++n)
                for (i64 wy = 0; wy < nwh; ++wy)
                    for (i64 wx = 0; wx < nww; ++wx)
                        for (i64 h = 0; h < heads; ++h, ++slot) {
                            gather_window(qn->value.data(), s, n, h * d, d, wy, wx, window, qb.data());
                            gather_window(kn->value.data(), s, n, h * d, d, wy, wx, window, kb.data());
                            gather_window(vn->value.data(), s, n, h * d, d, wy, wx, window, vb.data());
                            gather_window(self.grad.data(), s, n, h * d, d, wy, wx, window, gob.data());
                            const T* a = attn.data() + slot * nt * nt;
                            // dV += A^T * dO
                            if (dv.defined()) {
                                std::fill(buf.begin(), buf.end(), T(0));
                                mm_tn_accum(a, gob.data(), buf.data(), nt, d, nt);
                                scatter_window_add(buf.data(), s, n, h * d, d, wy, wx, window, dv.data());
                            }
                            // dA = dO * V^T ; dS = A o (dA - rowsum(dA o A))
                            mm_nt(gob.data(), vb.data(), da.data(), nt, nt, d);
                            for (i64 i = 0; i < nt; ++i) {
                                const T* ar = a + i * nt;
                                const T* dar = da.data() + i * nt;
                                T dot = 0;
                                for (i64 j = 0; j < nt; ++j) dot += ar[j] * dar[j];
                                T* dsr = ds.data() + i * nt;
                                for (i64 j = 0; j < nt; ++j) dsr[j] = ar[j] * (dar[j] - dot) * att_scale;
                            }
                            // dQ += dS * K ; dK += dS^T * Q
                            if (dq.defined()) {
                                mm_nn(ds.data(), kb.data(), buf.data(), nt, d, nt);
                                scatter_window_add(buf.data(), s, n, h * d, d, wy, wx, window, dq.data());
                            }
                            if (dk.defined()) {
                                std::fill(buf.begin(), buf.end(), T(0));
                                mm_tn_accum(ds.data(), qb.data(), buf.data(), nt, d, nt);
                                scatter_window_add(buf.data(), s, n, h * d, d, wy, wx, window, dk.data());
                            }
                        }
            if (dq.defined()) accumulate_grad(*qn, dq);
            if (dk.defined()) accumulate_grad(*kn, dk);
            if (dv.defined()) accumulate_grad(*vn, dv);
        },
        "window_attention");
}

template Var<float> window_attention(const Var<float>&, const Var<float>&, const Var<float>&, i64, i64);
template Var<double> window_attention(const Var<double>&, const Var<double>&, const Var<double>&, i64, i64);

}  // namespace s2c
