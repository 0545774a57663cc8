#pragma once

#include "s2c/autograd.hpp"

namespace s2c {

// ---- elementwise ----------------------------------------------------------
// Binary ops accept equal shapes, or a second operand shaped (1,C,1,1) or
// (1,1,1,1) that broadcasts over the first.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> div(const Var<T>& a, const Var<T>& b);

template <typename T> Var<T> scale(const Var<T>& a, double s);
template <typename T> Var<T> add_const(const Var<T>& a, double v);

template <typename T> Var<T> gelu(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);
template <typename T> Var<T> silu(const Var<T>& x);
template <typename T> Var<T> tanh_op(const Var<T>& x);
template <typename T> Var<T> softplus(const Var<T>& x);
template <typename T> Var<T> erf_op(const Var<T>& x);
template <typename T> Var<T> exp_op(const Var<T>& x);
template <typename T> Var<T> log_op(const Var<T>& x);
template <typename T> Var<T> abs_op(const Var<T>& x);
template <typename T> Var<T> square(const Var<T>& x);
template <typename T> Var<T> sqrt_op(const Var<T>& x);
template <typename T> Var<T> neg(const Var<T>& x);
template <typename T> Var<T> clamp_min(const Var<T>& x, double lo);
template <typename T> Var<T> pow_const(const Var<T>& x, double p);

template <typename T> Var<T> sum_all(const Var<T>& x);
template <typename T> Var<T> mean_all(const Var<T>& x);

/// Straight-through rounding: forward rounds half away from zero, backward
/// passes gradients unchanged.
template <typename T> Var<T> ste_round(const Var<T>& x);
/// Adds fresh U[-0.5, 0.5) noise; gradient passes through unchanged.
template <typename T> Var<T> add_uniform_noise(const Var<T>& x, Rng& rng);

/// Wrap a tensor as a constant (no gradient) graph input.
template <typename T> Var<T> constant(Tensor<T> t);

// ---- shape ----------------------------------------------------------------
/// Symmetric (edge-inclusive mirror) padding on H and W.
template <typename T> Var<T> pad_symmetric(const Var<T>& x, i64 top, i64 bottom, i64 left, i64 right);
template <typename T> Var<T> crop(const Var<T>& x, i64 h0, i64 hlen, i64 w0, i64 wlen);
template <typename T> Var<T> slice_channels(const Var<T>& x, i64 c0, i64 clen);
template <typename T> Var<T> concat_channels(const std::vector<Var<T>>& xs);
/// 2x2 mean pooling with stride 2 (trailing odd row/column dropped).
template <typename T> Var<T> avg_pool2(const Var<T>& x);

// ---- heavy ops -------------------------------------------------------------
/// Cross-correlation with zero padding. weight (Cout, Cin/groups, kh, kw);
/// bias may be an undefined Var.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, i64 stride, i64 pad, i64 groups = 1);

/// Transposed convolution; weight (Cin, Cout, kh, kw).
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, i64 stride, i64 pad,
                        i64 out_pad);

/// LayerNorm across the channel dimension at each (n,h,w) position.
template <typename T>
Var<T> layer_norm_chan(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps = 1e-6);

/// Multi-head softmax attention inside non-overlapping window×window tiles.
/// H and W must be divisible by window; scale is 1/sqrt(C/heads).
template <typename T>
Var<T> window_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, i64 heads, i64 window);

// Convenience shape helpers shared by conv-like ops.
inline i64 conv_out_dim(i64 in, i64 k, i64 stride, i64 pad) { return (in + 2 * pad - k) / stride + 1; }
inline i64 convt_out_dim(i64 in, i64 k, i64 stride, i64 pad, i64 out_pad) {
    return (in - 1) * stride - 2 * pad + k + out_pad;
}

}  // namespace s2c
