#pragma once

#include "s2c/nn.hpp"

namespace s2c {

enum class SpatialKind { identity, sepconv, attention };
enum class FfnKind { vanilla, additive, gated };

SpatialKind spatial_kind_from_string(const std::string& s);
FfnKind ffn_kind_from_string(const std::string& s);
std::string to_string(SpatialKind k);
std::string to_string(FfnKind k);

struct BlockSpec {
    SpatialKind spatial = SpatialKind::identity;
    FfnKind ffn = FfnKind::gated;
    i64 channels = 0;
    i64 window_size = 8;
    i64 dw_kernel = 5;
    i64 expansion_ratio = 4;
    i64 heads = 1;
    bool ffn_enabled = true;  ///< false only for the channel-aggregation ablation

    void validate() const;
};

/// Per-block wall-time buckets (forward pass), filled when profiling.
struct BlockTimings {
    double spatial_ms = 0;
    double channel_ms = 0;
};

/// Residual unit: x + Spatial(LN1(x)), then + FFN(LN2(.)).
/// The identity kind keeps LN1 and passes it straight through.
template <typename T>
struct S2CBlock {
    BlockSpec spec;
    LayerNormLayer<T> ln1, ln2;
    // sepconv path
    Conv2dLayer<T> pw_in, dw, pw_out;
    // attention path
    Conv2dLayer<T> proj_q, proj_k, proj_v, proj_out;
    // ffn path (f2 unused for vanilla)
    Conv2dLayer<T> ffn_in, ffn_in2, ffn_out;

    S2CBlock() = default;
    S2CBlock(const BlockSpec& spec, Rng& rng);

    /// Spatial-interaction operator applied to a normalized input.
    Var<T> spatial_op(const Var<T>& x) const;
    /// Channel-aggregation FFN applied to a normalized input.
    Var<T> ffn_op(const Var<T>& x) const;
    Var<T> forward(const Var<T>& x, BlockTimings* timings = nullptr) const;

    void collect(ParamList<T>& out, const std::string& prefix);
    i64 spatial_param_count() const;
    i64 flops(i64 h, i64 w) const;
    i64 spatial_flops(i64 h, i64 w) const;
    i64 ffn_flops(i64 h, i64 w) const;
};

/// Free-function views of the block operators (spec surface used by tests).
template <typename T>
Var<T> identity_interaction(const Var<T>& x);
template <typename T>
Var<T> sepconv_interaction(const Var<T>& x, const S2CBlock<T>& params);
template <typename T>
Var<T> window_attention_interaction(const Var<T>& x, const S2CBlock<T>& params);
template <typename T>
Var<T> apply_ffn(const Var<T>& x, FfnKind kind, const S2CBlock<T>& params);

extern template struct S2CBlock<float>;
extern template struct S2CBlock<double>;

}  // namespace s2c
