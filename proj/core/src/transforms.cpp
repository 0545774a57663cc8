#include "s2c/transforms.hpp"

#include <chrono>

namespace s2c {

namespace {

using Clock = std::chrono::steady_clock;

struct OtherTimer {
    StageTimings* t;
    Clock::time_point t0;
    explicit OtherTimer(StageTimings* t_) : t(t_), t0(Clock::now()) {}
    ~OtherTimer() {
        if (t) t->other_ms += std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    }
};

StageTimings* stage_slot(ModelProfile* prof, const char* name) {
    return prof ? &prof->stages[name] : nullptr;
}

}  // namespace

SpatialKind StageSpec::spatial_kind() const {
    switch (kind) {
        case 'C': return SpatialKind::sepconv;
        case 'A': return SpatialKind::attention;
        case 'I': return SpatialKind::identity;
        default: throw ConfigError(std::string("invalid stage kind '") + kind + "' (expected C, A, or I)");
    }
}

void StageSpec::validate() const {
    spatial_kind();
    if (num_blocks < 0) throw ConfigError("StageSpec: num_blocks must be >= 0");
    if (channels < 1) throw ConfigError("StageSpec: channels must be >= 1");
}

void ModelConfig::validate() const {
    for (const auto& s : main_stages) s.validate();
    if (latent_channels < 1) throw ConfigError("ModelConfig: latent_channels must be >= 1");
    if (window_size < 1 || dw_kernel < 1 || dw_kernel % 2 == 0 || expansion_ratio < 1 || head_dim < 1)
        throw ConfigError("ModelConfig: bad block geometry");
    entropy.validate(latent_channels);
}

i64 ModelConfig::heads_for(i64 channels) const {
    return (channels % head_dim == 0) ? channels / head_dim : 1;
}

std::string ModelConfig::stage_arrangement() const {
    std::string s;
    for (const auto& st : main_stages) s.push_back(st.kind);
    return s;
}

std::vector<std::string> preset_names() {
    return {"s2c-identity", "s2c-conv", "s2c-attention", "hybrid-s",        "hybrid-m",
            "hybrid-l",     "hybrid-t", "arrangement-ccc", "arrangement-aaa", "arrangement-acc",
            "arrangement-cca", "arrangement-caa"};
}

u8 variant_id(const std::string& name) {
    const auto names = preset_names();
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<u8>(i);
    return 255;
}

ModelConfig preset_config(const std::string& name) {
    ModelConfig cfg;
    cfg.variant_name = name;
    auto stages = [](const char* kinds, i64 l1, i64 l2, i64 l3, i64 c1 = 192, i64 c2 = 192, i64 c3 = 192) {
        return std::array<StageSpec, 3>{StageSpec{kinds[0], l1, c1}, StageSpec{kinds[1], l2, c2},
                                        StageSpec{kinds[2], l3, c3}};
    };
    if (name == "s2c-identity")
        cfg.main_stages = stages("III", 3, 3, 3);
    else if (name == "s2c-conv" || name == "arrangement-ccc")
        cfg.main_stages = stages("CCC", 3, 3, 3);
    else if (name == "s2c-attention" || name == "arrangement-aaa")
        cfg.main_stages = stages("AAA", 3, 3, 3);
    else if (name == "hybrid-s" || name == "arrangement-caa")
        cfg.main_stages = stages("CAA", 3, 3, 3);
    else if (name == "hybrid-m")
        cfg.main_stages = stages("CAA", 3, 5, 5);
    else if (name == "hybrid-l")
        cfg.main_stages = stages("CAA", 3, 8, 8);
    else if (name == "hybrid-t")
        cfg.main_stages = stages("CAA", 3, 5, 8, 96, 192, 256);
    else if (name == "arrangement-acc")
        cfg.main_stages = stages("ACC", 3, 3, 3);
    else if (name == "arrangement-cca")
        cfg.main_stages = stages("CCA", 3, 3, 3);
    else
        throw ConfigError("unknown preset: " + name);
    cfg.latent_channels = 320;
    cfg.entropy.resolve(cfg.latent_channels);
    cfg.validate();
    return cfg;
}

template <typename T>
Var<T> pad_input(const Var<T>& x) {
    const Shape s = x.shape();
    const i64 ph = padded_dim(s.h) - s.h;
    const i64 pw = padded_dim(s.w) - s.w;
    if (ph == 0 && pw == 0) return x;
    return pad_symmetric(x, 0, ph, 0, pw);
}

template <typename T>
BlockSpec Model<T>::block_spec(SpatialKind kind, i64 channels) const {
    BlockSpec sp;
    sp.spatial = kind;
    sp.ffn = cfg_.ffn;
    sp.channels = channels;
    sp.window_size = cfg_.window_size;
    sp.dw_kernel = cfg_.dw_kernel;
    sp.expansion_ratio = cfg_.expansion_ratio;
    sp.heads = cfg_.heads_for(channels);
    sp.ffn_enabled = cfg_.ffn_enabled;
    return sp;
}

template <typename T>
Model<T>::Model(const ModelConfig& cfg, u64 seed) : cfg_(cfg) {
    cfg_.entropy.resolve(cfg_.latent_channels);
    cfg_.validate();
    Rng rng(seed);
    const i64 c1 = cfg_.main_stages[0].channels;
    const i64 c2 = cfg_.main_stages[1].channels;
    const i64 c3 = cfg_.main_stages[2].channels;
    const i64 c4 = cfg_.latent_channels;
    const i64 hc = cfg_.entropy.hyper_channels;

    down_[0] = Conv2dLayer<T>(3, c1, 5, 2, 2, rng);
    down_[1] = Conv2dLayer<T>(c1, c1, 5, 2, 2, rng);
    down_[2] = Conv2dLayer<T>(c1, c2, 5, 2, 2, rng);
    down_[3] = Conv2dLayer<T>(c2, c3, 5, 2, 2, rng);
    to_latent_ = Conv2dLayer<T>(c3, c4, 1, 1, 0, rng);
    for (int i = 0; i < 3; ++i) {
        const auto& st = cfg_.main_stages[static_cast<size_t>(i)];
        for (i64 b = 0; b < st.num_blocks; ++b)
            enc_stages_[static_cast<size_t>(i)].emplace_back(block_spec(st.spatial_kind(), st.channels), rng);
    }

    from_latent_ = Conv2dLayer<T>(c4, c3, 1, 1, 0, rng);
    for (int i = 0; i < 3; ++i) {
        const auto& st = cfg_.main_stages[static_cast<size_t>(i)];
        for (i64 b = 0; b < st.num_blocks; ++b)
            dec_stages_[static_cast<size_t>(i)].emplace_back(block_spec(st.spatial_kind(), st.channels), rng);
    }
    up_[0] = ConvT2dLayer<T>(c3, c2, 5, 2, 2, 1, rng);
    up_[1] = ConvT2dLayer<T>(c2, c1, 5, 2, 2, 1, rng);
    up_[2] = ConvT2dLayer<T>(c1, c1, 5, 2, 2, 1, rng);
    up_[3] = ConvT2dLayer<T>(c1, 3, 5, 2, 2, 1, rng);

    ha_down1_ = Conv2dLayer<T>(c4, hc, 5, 2, 2, rng);
    for (i64 b = 0; b < cfg_.entropy.hyper_blocks; ++b)
        ha_blocks_.emplace_back(block_spec(SpatialKind::sepconv, hc), rng);
    ha_down2_ = Conv2dLayer<T>(hc, hc, 5, 2, 2, rng);
    hs_up1_ = ConvT2dLayer<T>(hc, hc, 5, 2, 2, 1, rng);
    for (i64 b = 0; b < cfg_.entropy.hyper_blocks; ++b)
        hs_blocks_.emplace_back(block_spec(SpatialKind::sepconv, hc), rng);
    hs_up2_ = ConvT2dLayer<T>(hc, 2 * c4, 5, 2, 2, 1, rng);

    prior_ = FactorizedPrior<T>(hc, rng);

    if (cfg_.entropy.mode == ContextMode::scctx) {
        const i64 cw = cfg_.entropy.ctx_channels;
        const i64 aw = cfg_.entropy.agg_channels;
        i64 prev = 0;
        for (i64 g = 0; g < num_groups(); ++g) {
            GroupContextNets<T> nets;
            nets.group_width = group_width(g);
            nets.has_channel_ctx = (g > 0);
            if (g > 0) {
                nets.ch_in = Conv2dLayer<T>(prev, cw, 5, 1, 2, rng);
                nets.ch_block = S2CBlock<T>(block_spec(SpatialKind::sepconv, cw), rng);
            }
            if (cfg_.entropy.checkerboard) nets.sp_in = Conv2dLayer<T>(nets.group_width, cw, 5, 1, 2, rng);
            nets.agg_in = Conv2dLayer<T>(2 * c4 + 2 * cw, aw, 1, 1, 0, rng);
            nets.agg_block = S2CBlock<T>(block_spec(SpatialKind::identity, aw), rng);
            nets.agg_out = Conv2dLayer<T>(aw, 2 * nets.group_width, 1, 1, 0, rng);
            prev += nets.group_width;
            group_nets_.push_back(std::move(nets));
        }
    }
    collect(params_);
}

template <typename T>
void Model<T>::collect(ParamList<T>& out) {
    out.clear();
    for (int i = 0; i < 4; ++i) down_[i].collect(out, "enc.down" + std::to_string(i + 1));
    for (int i = 0; i < 3; ++i)
        for (size_t b = 0; b < enc_stages_[static_cast<size_t>(i)].size(); ++b)
            enc_stages_[static_cast<size_t>(i)][b].collect(out, "enc.s" + std::to_string(i + 1) + ".b" + std::to_string(b));
    to_latent_.collect(out, "enc.to_latent");
    from_latent_.collect(out, "dec.from_latent");
    for (int i = 0; i < 3; ++i)
        for (size_t b = 0; b < dec_stages_[static_cast<size_t>(i)].size(); ++b)
            dec_stages_[static_cast<size_t>(i)][b].collect(out, "dec.s" + std::to_string(i + 1) + ".b" + std::to_string(b));
    for (int i = 0; i < 4; ++i) up_[i].collect(out, "dec.up" + std::to_string(i + 1));
    ha_down1_.collect(out, "hyper.ha.down1");
    for (size_t b = 0; b < ha_blocks_.size(); ++b) ha_blocks_[b].collect(out, "hyper.ha.b" + std::to_string(b));
    ha_down2_.collect(out, "hyper.ha.down2");
    hs_up1_.collect(out, "hyper.hs.up1");
    for (size_t b = 0; b < hs_blocks_.size(); ++b) hs_blocks_[b].collect(out, "hyper.hs.b" + std::to_string(b));
    hs_up2_.collect(out, "hyper.hs.up2");
    prior_.collect(out, "prior");
    for (size_t g = 0; g < group_nets_.size(); ++g) group_nets_[g].collect(out, "ctx.g" + std::to_string(g));
}

template <typename T>
Var<T> Model<T>::run_stage(const std::vector<S2CBlock<T>>& blocks, Var<T> x, StageTimings* t) const {
    BlockTimings bt;
    for (const auto& b : blocks) x = b.forward(x, t ? &bt : nullptr);
    if (t) {
        t->spatial_ms += bt.spatial_ms;
        t->channel_ms += bt.channel_ms;
    }
    return x;
}

template <typename T>
Var<T> Model<T>::analyze(const Var<T>& x, ModelProfile* prof) const {
    const Shape s = x.shape();
    if (s.c != 3) throw ShapeError("analyze: expected 3 input channels, got " + s.str());
    if (s.h % 64 != 0 || s.w % 64 != 0)
        throw ShapeError("analyze: H and W must be multiples of 64 after padding (got " + s.str() + ")");
    Var<T> t = x;
    {
        OtherTimer ot(stage_slot(prof, "enc.s1"));
        t = down_[1](down_[0](t));
    }
    t = run_stage(enc_stages_[0], t, stage_slot(prof, "enc.s1"));
    {
        OtherTimer ot(stage_slot(prof, "enc.s2"));
        t = down_[2](t);
    }
    t = run_stage(enc_stages_[1], t, stage_slot(prof, "enc.s2"));
    {
        OtherTimer ot(stage_slot(prof, "enc.s3"));
        t = down_[3](t);
    }
    t = run_stage(enc_stages_[2], t, stage_slot(prof, "enc.s3"));
    {
        OtherTimer ot(stage_slot(prof, "enc.s3"));
        t = to_latent_(t);
    }
    return t;
}

template <typename T>
Var<T> Model<T>::synthesize(const Var<T>& y_hat, ModelProfile* prof) const {
    if (y_hat.shape().c != cfg_.latent_channels)
        throw ShapeError("synthesize: latent channel mismatch " + y_hat.shape().str());
    Var<T> t = y_hat;
    {
        OtherTimer ot(stage_slot(prof, "dec.s3"));
        t = from_latent_(t);
    }
    t = run_stage(dec_stages_[2], t, stage_slot(prof, "dec.s3"));
    {
        OtherTimer ot(stage_slot(prof, "dec.s2"));
        t = up_[0](t);
    }
    t = run_stage(dec_stages_[1], t, stage_slot(prof, "dec.s2"));
    {
        OtherTimer ot(stage_slot(prof, "dec.s1"));
        t = up_[1](t);
    }
    t = run_stage(dec_stages_[0], t, stage_slot(prof, "dec.s1"));
    {
        OtherTimer ot(stage_slot(prof, "dec.s1"));
        t = up_[3](up_[2](t));
    }
    return t;
}

template <typename T>
Var<T> Model<T>::hyper_analyze(const Var<T>& y, ModelProfile* prof) const {
    StageTimings* st = stage_slot(prof, "hyper");
    Var<T> t = y;
    {
        OtherTimer ot(st);
        t = ha_down1_(t);
    }
    t = run_stage(ha_blocks_, t, st);
    {
        OtherTimer ot(st);
        t = ha_down2_(t);
    }
    return t;
}

template <typename T>
Var<T> Model<T>::hyper_feature(const Var<T>& z_hat, ModelProfile* prof) const {
    StageTimings* st = stage_slot(prof, "hyper");
    Var<T> t = z_hat;
    {
        OtherTimer ot(st);
        t = hs_up1_(t);
    }
    t = run_stage(hs_blocks_, t, st);
    {
        OtherTimer ot(st);
        t = hs_up2_(t);
    }
    return t;
}

template <typename T>
std::pair<Var<T>, Var<T>> Model<T>::hyper_synthesize(const Var<T>& z_hat) const {
    Var<T> feat = hyper_feature(z_hat);
    const i64 c4 = cfg_.latent_channels;
    Var<T> mu = slice_channels(feat, 0, c4);
    Var<T> sigma = sigma_positive(slice_channels(feat, c4, c4));
    return {mu, sigma};
}

template <typename T>
i64 Model<T>::group_offset(i64 g) const {
    i64 off = 0;
    for (i64 i = 0; i < g; ++i) off += group_width(i);
    return off;
}

template <typename T>
Var<T> Model<T>::group_param_raw(i64 g, const Var<T>& hyper_feat, const Var<T>& prev_groups,
                                 const Var<T>& anchor_masked, ModelProfile* prof) const {
    if (cfg_.entropy.mode == ContextMode::hyperprior_only)
        throw ConfigError("group_param_raw: model runs in hyperprior_only mode");
    if (g < 0 || g >= num_groups()) throw CodingError("group_param_raw: group index out of range");
    const auto& nets = group_nets_[static_cast<size_t>(g)];
    const Shape fs = hyper_feat.shape();
    const Shape ctx_shape{fs.n, cfg_.entropy.ctx_channels, fs.h, fs.w};
    StageTimings* st = stage_slot(prof, "entropy");

    Var<T> ch_ctx;
    if (nets.has_channel_ctx && prev_groups.defined()) {
        {
            OtherTimer ot(st);
            ch_ctx = nets.ch_in(prev_groups);
        }
        BlockTimings bt;
        ch_ctx = nets.ch_block.forward(ch_ctx, st ? &bt : nullptr);
        if (st) {
            st->spatial_ms += bt.spatial_ms;
            st->channel_ms += bt.channel_ms;
        }
    } else {
        ch_ctx = constant(Tensor<T>::zeros(ctx_shape));
    }

    Var<T> sp_ctx;
    if (anchor_masked.defined()) {
        OtherTimer ot(st);
        sp_ctx = nets.sp_in(anchor_masked);
    } else {
        sp_ctx = constant(Tensor<T>::zeros(ctx_shape));
    }

    Var<T> trunk;
    {
        OtherTimer ot(st);
        trunk = nets.agg_in(concat_channels<T>({hyper_feat, ch_ctx, sp_ctx}));
    }
    BlockTimings bt;
    trunk = nets.agg_block.forward(trunk, st ? &bt : nullptr);
    if (st) {
        st->spatial_ms += bt.spatial_ms;
        st->channel_ms += bt.channel_ms;
    }
    OtherTimer ot(st);
    return nets.agg_out(trunk);
}

template <typename T>
ScctxSlice<T> Model<T>::scctx_parameters(i64 g, bool anchor_phase, const Tensor<T>& z_hat,
                                         const std::vector<Tensor<T>>& decoded_groups,
                                         const Tensor<T>* y_hat_g_anchors) const {
    Var<T> feat = hyper_feature(constant(z_hat));
    if (cfg_.entropy.mode == ContextMode::hyperprior_only) {
        const i64 c4 = cfg_.latent_channels;
        Var<T> mu = slice_channels(feat, 0, c4);
        Var<T> sigma = sigma_positive(slice_channels(feat, c4, c4));
        return {mu.value(), sigma.value()};
    }
    if (static_cast<i64>(decoded_groups.size()) != g)
        throw CodingError("scctx_parameters: need exactly the previously decoded groups, in order");
    Var<T> prev;
    if (g > 0) {
        std::vector<Var<T>> vs;
        for (const auto& t : decoded_groups) vs.push_back(constant(t));
        prev = concat_channels(vs);
    }
    Var<T> anchors;
    if (!anchor_phase) {
        if (!cfg_.entropy.checkerboard) throw CodingError("scctx_parameters: non-anchor phase without checkerboard");
        if (!y_hat_g_anchors) throw CodingError("scctx_parameters: non-anchor phase needs anchor slice");
        anchors = constant(*y_hat_g_anchors);
    }
    Var<T> raw = group_param_raw(g, feat, prev, anchors);
    const i64 w = group_width(g);
    Var<T> mu = slice_channels(raw, 0, w);
    Var<T> sigma = sigma_positive(slice_channels(raw, w, w));
    return {mu.value(), sigma.value()};
}

template <typename T>
Shape Model<T>::latent_shape(i64 n, i64 h, i64 w) const {
    return Shape{n, cfg_.latent_channels, padded_dim(h) / 16, padded_dim(w) / 16};
}

template <typename T>
Shape Model<T>::hyper_shape(i64 n, i64 h, i64 w) const {
    return Shape{n, cfg_.entropy.hyper_channels, padded_dim(h) / 64, padded_dim(w) / 64};
}

template <typename T>
i64 Model<T>::flops(i64 h, i64 w) const {
    const i64 hp = padded_dim(h), wp = padded_dim(w);
    i64 f = 0;
    // analysis
    f += down_[0].flops(hp / 2, wp / 2) + down_[1].flops(hp / 4, wp / 4) + down_[2].flops(hp / 8, wp / 8) +
         down_[3].flops(hp / 16, wp / 16) + to_latent_.flops(hp / 16, wp / 16);
    const i64 res[3][2] = {{hp / 4, wp / 4}, {hp / 8, wp / 8}, {hp / 16, wp / 16}};
    for (int i = 0; i < 3; ++i)
        for (const auto& b : enc_stages_[static_cast<size_t>(i)]) f += b.flops(res[i][0], res[i][1]);
    // synthesis
    f += from_latent_.flops(hp / 16, wp / 16);
    for (int i = 0; i < 3; ++i)
        for (const auto& b : dec_stages_[static_cast<size_t>(i)]) f += b.flops(res[i][0], res[i][1]);
    f += up_[0].flops(hp / 16, wp / 16) + up_[1].flops(hp / 8, wp / 8) + up_[2].flops(hp / 4, wp / 4) +
         up_[3].flops(hp / 2, wp / 2);
    // hyper
    f += ha_down1_.flops(hp / 32, wp / 32) + ha_down2_.flops(hp / 64, wp / 64);
    for (const auto& b : ha_blocks_) f += b.flops(hp / 32, wp / 32);
    f += hs_up1_.flops(hp / 64, wp / 64) + hs_up2_.flops(hp / 32, wp / 32);
    for (const auto& b : hs_blocks_) f += b.flops(hp / 32, wp / 32);
    // context nets at latent resolution
    for (const auto& nets : group_nets_) {
        const i64 lh = hp / 16, lw = wp / 16;
        if (nets.has_channel_ctx) f += nets.ch_in.flops(lh, lw) + nets.ch_block.flops(lh, lw);
        if (nets.sp_in.weight.defined()) f += nets.sp_in.flops(lh, lw);
        f += nets.agg_in.flops(lh, lw) + nets.agg_block.flops(lh, lw) + nets.agg_out.flops(lh, lw);
    }
    return f;
}

template class Model<float>;
template class Model<double>;
template Var<float> pad_input(const Var<float>&);
template Var<double> pad_input(const Var<double>&);

}  // namespace s2c
