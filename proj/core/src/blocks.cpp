#include "s2c/blocks.hpp"

#include <chrono>

namespace s2c {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

SpatialKind spatial_kind_from_string(const std::string& s) {
    if (s == "identity") return SpatialKind::identity;
    if (s == "sepconv") return SpatialKind::sepconv;
    if (s == "attention") return SpatialKind::attention;
    throw ConfigError("unknown spatial kind: " + s);
}

FfnKind ffn_kind_from_string(const std::string& s) {
    if (s == "vanilla") return FfnKind::vanilla;
    if (s == "additive") return FfnKind::additive;
    if (s == "gated") return FfnKind::gated;
    throw ConfigError("unknown ffn kind: " + s);
}

std::string to_string(SpatialKind k) {
    switch (k) {
        case SpatialKind::identity: return "identity";
        case SpatialKind::sepconv: return "sepconv";
        default: return "attention";
    }
}

std::string to_string(FfnKind k) {
    switch (k) {
        case FfnKind::vanilla: return "vanilla";
        case FfnKind::additive: return "additive";
        default: return "gated";
    }
}

void BlockSpec::validate() const {
    if (channels < 1) throw ConfigError("BlockSpec: channels must be >= 1");
    if (window_size < 1) throw ConfigError("BlockSpec: window_size must be >= 1");
    if (dw_kernel < 1 || dw_kernel % 2 == 0) throw ConfigError("BlockSpec: dw_kernel must be odd and positive");
    if (expansion_ratio < 1) throw ConfigError("BlockSpec: expansion_ratio must be >= 1");
    if (heads < 1) throw ConfigError("BlockSpec: heads must be >= 1");
    if (spatial == SpatialKind::attention && channels % heads != 0)
        throw ConfigError("BlockSpec: channels must divide evenly into heads for attention");
}

template <typename T>
S2CBlock<T>::S2CBlock(const BlockSpec& sp, Rng& rng) : spec(sp) {
    spec.validate();
    const i64 c = spec.channels;
    ln1 = LayerNormLayer<T>(c);
    ln2 = LayerNormLayer<T>(c);
    switch (spec.spatial) {
        case SpatialKind::identity: break;
        case SpatialKind::sepconv:
            pw_in = Conv2dLayer<T>(c, c, 1, 1, 0, rng);
            dw = Conv2dLayer<T>(c, c, spec.dw_kernel, 1, spec.dw_kernel / 2, rng, /*groups=*/c);
            pw_out = Conv2dLayer<T>(c, c, 1, 1, 0, rng);
            break;
        case SpatialKind::attention:
            proj_q = Conv2dLayer<T>(c, c, 1, 1, 0, rng);
            proj_k = Conv2dLayer<T>(c, c, 1, 1, 0, rng);
            proj_v = Conv2dLayer<T>(c, c, 1, 1, 0, rng);
            proj_out = Conv2dLayer<T>(c, c, 1, 1, 0, rng);
            break;
    }
    if (spec.ffn_enabled) {
        const i64 hidden = c * spec.expansion_ratio;
        ffn_in = Conv2dLayer<T>(c, hidden, 1, 1, 0, rng);
        if (spec.ffn != FfnKind::vanilla) ffn_in2 = Conv2dLayer<T>(c, hidden, 1, 1, 0, rng);
        ffn_out = Conv2dLayer<T>(hidden, c, 1, 1, 0, rng);
    }
}

template <typename T>
Var<T> S2CBlock<T>::spatial_op(const Var<T>& x) const {
    switch (spec.spatial) {
        case SpatialKind::identity: return x;
        case SpatialKind::sepconv: return pw_out(dw(gelu(pw_in(x))));
        case SpatialKind::attention: {
            const Shape s = x.shape();
            const i64 win = spec.window_size;
            const i64 ph = (win - s.h % win) % win;
            const i64 pw = (win - s.w % win) % win;
            Var<T> t = x;
            if (ph > 0 || pw > 0) t = pad_symmetric(t, 0, ph, 0, pw);
            Var<T> att = window_attention(proj_q(t), proj_k(t), proj_v(t), spec.heads, win);
            Var<T> out = proj_out(att);
            if (ph > 0 || pw > 0) out = crop(out, 0, s.h, 0, s.w);
            return out;
        }
    }
    throw ConfigError("unreachable spatial kind");
}

template <typename T>
Var<T> S2CBlock<T>::ffn_op(const Var<T>& x) const {
    switch (spec.ffn) {
        case FfnKind::vanilla: return ffn_out(gelu(ffn_in(x)));
        case FfnKind::additive: return ffn_out(add(gelu(ffn_in(x)), silu(ffn_in2(x))));
        case FfnKind::gated: return ffn_out(mul(gelu(ffn_in(x)), ffn_in2(x)));
    }
    throw ConfigError("unknown ffn kind");
}

template <typename T>
Var<T> S2CBlock<T>::forward(const Var<T>& x, BlockTimings* timings) const {
    if (x.shape().c != spec.channels)
        throw ShapeError("S2CBlock: input channels " + x.shape().str() + " != spec channels");
    auto t0 = Clock::now();
    Var<T> y1 = add(x, spatial_op(ln1(x)));
    if (timings) timings->spatial_ms += ms_since(t0);
    if (!spec.ffn_enabled) return y1;
    t0 = Clock::now();
    Var<T> y2 = add(y1, ffn_op(ln2(y1)));
    if (timings) timings->channel_ms += ms_since(t0);
    return y2;
}

template <typename T>
void S2CBlock<T>::collect(ParamList<T>& out, const std::string& prefix) {
    ln1.collect(out, prefix + ".ln1");
    switch (spec.spatial) {
        case SpatialKind::identity: break;
        case SpatialKind::sepconv:
            pw_in.collect(out, prefix + ".sep.pw_in");
            dw.collect(out, prefix + ".sep.dw");
            pw_out.collect(out, prefix + ".sep.pw_out");
            break;
        case SpatialKind::attention:
            proj_q.collect(out, prefix + ".attn.q");
            proj_k.collect(out, prefix + ".attn.k");
            proj_v.collect(out, prefix + ".attn.v");
            proj_out.collect(out, prefix + ".attn.out");
            break;
    }
    if (spec.ffn_enabled) {
        ln2.collect(out, prefix + ".ln2");
        ffn_in.collect(out, prefix + ".ffn.in");
        if (ffn_in2.weight.defined()) ffn_in2.collect(out, prefix + ".ffn.in2");
        ffn_out.collect(out, prefix + ".ffn.out");
    }
}

template <typename T>
i64 S2CBlock<T>::spatial_param_count() const {
    ParamList<T> tmp;
    auto* self = const_cast<S2CBlock<T>*>(this);
    switch (spec.spatial) {
        case SpatialKind::identity: return 0;
        case SpatialKind::sepconv:
            self->pw_in.collect(tmp, "");
            self->dw.collect(tmp, "");
            self->pw_out.collect(tmp, "");
            break;
        case SpatialKind::attention:
            self->proj_q.collect(tmp, "");
            self->proj_k.collect(tmp, "");
            self->proj_v.collect(tmp, "");
            self->proj_out.collect(tmp, "");
            break;
    }
    return param_count(tmp);
}

template <typename T>
i64 S2CBlock<T>::spatial_flops(i64 h, i64 w) const {
    switch (spec.spatial) {
        case SpatialKind::identity: return 0;
        case SpatialKind::sepconv: return pw_in.flops(h, w) + dw.flops(h, w) + pw_out.flops(h, w);
        case SpatialKind::attention: {
            const i64 win = spec.window_size;
            const i64 hp = (h + win - 1) / win * win;
            const i64 wp = (w + win - 1) / win * win;
            const i64 windows = (hp / win) * (wp / win);
            const i64 nt = win * win;
            const i64 proj = proj_q.flops(hp, wp) + proj_k.flops(hp, wp) + proj_v.flops(hp, wp) + proj_out.flops(hp, wp);
            // scores + weighted sum: 2 * nt^2 * d per head, twice
            return proj + windows * 4 * nt * nt * spec.channels;
        }
    }
    return 0;
}

template <typename T>
i64 S2CBlock<T>::ffn_flops(i64 h, i64 w) const {
    if (!spec.ffn_enabled) return 0;
    i64 f = ffn_in.flops(h, w) + ffn_out.flops(h, w);
    if (spec.ffn != FfnKind::vanilla) f += ffn_in2.flops(h, w);
    return f;
}

template <typename T>
i64 S2CBlock<T>::flops(i64 h, i64 w) const {
    return spatial_flops(h, w) + ffn_flops(h, w);
}

template <typename T>
Var<T> identity_interaction(const Var<T>& x) {
    return x;
}

template <typename T>
Var<T> sepconv_interaction(const Var<T>& x, const S2CBlock<T>& params) {
    if (x.shape().c != params.spec.channels) throw ShapeError("sepconv_interaction: channel mismatch");
    return params.pw_out(params.dw(gelu(params.pw_in(x))));
}

template <typename T>
Var<T> window_attention_interaction(const Var<T>& x, const S2CBlock<T>& params) {
    if (x.shape().c != params.spec.channels) throw ShapeError("window_attention_interaction: channel mismatch");
    return params.spatial_op(x);
}

template <typename T>
Var<T> apply_ffn(const Var<T>& x, FfnKind kind, const S2CBlock<T>& params) {
    if (kind != params.spec.ffn) throw ConfigError("apply_ffn: kind does not match block parameters");
    return params.ffn_op(x);
}

template struct S2CBlock<float>;
template struct S2CBlock<double>;

#define S2C_INSTANTIATE(T)                                                        \
    template Var<T> identity_interaction(const Var<T>&);                          \
    template Var<T> sepconv_interaction(const Var<T>&, const S2CBlock<T>&);       \
    template Var<T> window_attention_interaction(const Var<T>&, const S2CBlock<T>&); \
    template Var<T> apply_ffn(const Var<T>&, FfnKind, const S2CBlock<T>&);

S2C_INSTANTIATE(float)
S2C_INSTANTIATE(double)
#undef S2C_INSTANTIATE

}  // namespace s2c
