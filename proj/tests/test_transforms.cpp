#include <doctest.h>

#include "s2c/transforms.hpp"
#include "test_helpers.hpp"

using namespace s2c;

namespace {

// Desk-scale config: full structure, small widths, fast on one core.
ModelConfig desk_config(const char* kinds = "III", i64 blocks = 1, i64 ch = 16, i64 latent = 32) {
    ModelConfig cfg;
    cfg.variant_name = "desk";
    cfg.main_stages = {StageSpec{kinds[0], blocks, ch}, StageSpec{kinds[1], blocks, ch}, StageSpec{kinds[2], blocks, ch}};
    cfg.latent_channels = latent;
    cfg.window_size = 4;
    cfg.head_dim = 8;
    cfg.entropy.hyper_channels = 16;
    cfg.entropy.ctx_channels = 8;
    cfg.entropy.agg_channels = 16;
    cfg.entropy.mode = ContextMode::scctx;
    cfg.entropy.resolve(latent);
    return cfg;
}

}  // namespace

TEST_CASE("every named preset assembles with the pinned geometry") {
    for (const auto& name : preset_names()) {
        ModelConfig cfg = preset_config(name);
        CHECK(cfg.latent_channels == 320);
        CHECK(cfg.entropy.group_widths == std::vector<i64>{16, 16, 32, 64, 192});
        Model<float> m(cfg, 1);
        CHECK(m.total_param_count() > 0);
    }
    ModelConfig hs = preset_config("hybrid-s");
    CHECK(hs.stage_arrangement() == "CAA");
    for (const auto& st : hs.main_stages) CHECK(st.num_blocks == 3);
    CHECK(preset_config("hybrid-m").main_stages[1].num_blocks == 5);
    CHECK(preset_config("hybrid-l").main_stages[2].num_blocks == 8);
    ModelConfig ht = preset_config("hybrid-t");
    CHECK(ht.main_stages[0].channels == 96);
    CHECK(ht.main_stages[1].channels == 192);
    CHECK(ht.main_stages[2].channels == 256);
    CHECK(ht.main_stages[0].num_blocks == 3);
    CHECK(ht.main_stages[1].num_blocks == 5);
    CHECK(ht.main_stages[2].num_blocks == 8);
    ModelConfig idn = preset_config("s2c-identity");
    for (const auto& st : idn.main_stages) {
        CHECK(st.kind == 'I');
        CHECK(st.channels == 192);
    }
    CHECK(preset_config("arrangement-acc").stage_arrangement() == "ACC");
    CHECK(preset_config("arrangement-cca").stage_arrangement() == "CCA");
    CHECK(preset_config("arrangement-ccc").stage_arrangement() == "CCC");
    CHECK(preset_config("arrangement-aaa").stage_arrangement() == "AAA");
    CHECK(preset_config("arrangement-caa").stage_arrangement() == "CAA");
    CHECK_THROWS_AS(preset_config("foo"), ConfigError);
}

TEST_CASE("analyze maps 256x256 to a 320x16x16 latent (hybrid-s and identity)") {
    Rng rng(31);
    for (const char* name : {"hybrid-s", "s2c-identity"}) {
        Model<float> m(preset_config(name), 7);
        Var<float> x(Tensor<float>::uniform(Shape{1, 3, 256, 256}, rng, 0, 1));
        auto y = m.analyze(x);
        CHECK(y.shape() == Shape{1, 320, 16, 16});
        CHECK(y.value().all_finite());
        auto xh = m.synthesize(y);
        CHECK(xh.shape() == Shape{1, 3, 256, 256});
        CHECK(xh.value().all_finite());
    }
    // latent/hyper shape arithmetic holds for every preset
    for (const auto& name : preset_names()) {
        Model<float> m(preset_config(name), 7);
        CHECK(m.latent_shape(1, 256, 256) == Shape{1, 320, 16, 16});
        CHECK(m.latent_shape(2, 768, 512) == Shape{2, 320, 48, 32});
        CHECK(m.hyper_shape(1, 256, 256) == Shape{1, 192, 4, 4});
    }
}

TEST_CASE("hybrid-t maps 64x64 input to 320x4x4 latent through 96/192/256 stages") {
    Rng rng(32);
    Model<float> m(preset_config("hybrid-t"), 3);
    Var<float> x(Tensor<float>::uniform(Shape{1, 3, 64, 64}, rng, 0, 1));
    auto y = m.analyze(x);
    CHECK(y.shape() == Shape{1, 320, 4, 4});
    CHECK(m.config().main_stages[0].channels == 96);
    CHECK(m.config().main_stages[1].channels == 192);
    CHECK(m.config().main_stages[2].channels == 256);
}

TEST_CASE("doubling input height doubles latent height") {
    Rng rng(33);
    Model<float> m(desk_config(), 5);
    Var<float> x1(Tensor<float>::uniform(Shape{1, 3, 64, 128}, rng, 0, 1));
    Var<float> x2(Tensor<float>::uniform(Shape{1, 3, 128, 128}, rng, 0, 1));
    CHECK(m.analyze(x1).shape() == Shape{1, 32, 4, 8});
    CHECK(m.analyze(x2).shape() == Shape{1, 32, 8, 8});
}

TEST_CASE("all-zero parameters give a finite constant reconstruction") {
    Rng rng(34);
    Model<float> m(desk_config("CAA"), 5);
    for (auto& p : m.params()) p.var->value().fill(0.0f);
    Var<float> y(Tensor<float>::uniform(Shape{1, 32, 4, 4}, rng, -2, 2));
    auto xh = m.synthesize(y);
    CHECK(xh.value().all_finite());
    // constant per channel: every pixel equals the channel's first pixel
    for (i64 c = 0; c < 3; ++c)
        for (i64 i = 0; i < 64 * 64; ++i)
            CHECK(xh.value()[c * 64 * 64 + i] == xh.value()[c * 64 * 64]);
}

TEST_CASE("padding policy restores original sizes across 20 random sizes in 64..1024") {
    Rng rng(35);
    Model<float> m(desk_config(), 11);
    std::uniform_int_distribution<i64> dim(64, 1024);
    for (int t = 0; t < 20; ++t) {
        const i64 h = dim(rng), w = dim(rng);
        Var<float> x(Tensor<float>::uniform(Shape{1, 3, h, w}, rng, 0, 1));
        Var<float> xp = pad_input(x);
        CHECK(xp.shape().h % 64 == 0);
        CHECK(xp.shape().w % 64 == 0);
        auto y = m.analyze(xp);
        CHECK(y.shape() == m.latent_shape(1, h, w));
        auto xh = m.synthesize(y);
        CHECK(xh.shape().h == padded_dim(h));
        CHECK(xh.shape().w == padded_dim(w));
        auto restored = crop(xh, 0, h, 0, w);
        CHECK(restored.shape() == Shape{1, 3, h, w});
    }
    // analyze rejects unpadded inputs rather than guessing
    Var<float> bad(Tensor<float>::uniform(Shape{1, 3, 65, 64}, rng, 0, 1));
    CHECK_THROWS_AS(m.analyze(bad), ShapeError);
}

TEST_CASE("hyper transforms: shapes, sigma positivity, zero-weight sigma constant") {
    Rng rng(36);
    Model<float> m(preset_config("hybrid-s"), 13);
    Var<float> y(Tensor<float>::uniform(Shape{1, 320, 16, 16}, rng, -1, 1));
    auto z = m.hyper_analyze(y);
    CHECK(z.shape() == Shape{1, 192, 4, 4});
    auto [mu, sigma] = m.hyper_synthesize(z);
    CHECK(mu.shape() == Shape{1, 320, 16, 16});
    CHECK(sigma.shape() == Shape{1, 320, 16, 16});
    CHECK(sigma.value().min() > 0.0f);

    // zero weights + zero z: sigma is exactly the positive map at 0 everywhere
    Model<float> mz(desk_config(), 13);
    for (auto& p : mz.params()) p.var->value().fill(0.0f);
    Var<float> z0(Tensor<float>::zeros(Shape{1, 16, 2, 2}));
    auto [mu0, sigma0] = mz.hyper_synthesize(z0);
    const float expected = static_cast<float>(std::log(2.0) + kSigmaFloor);
    for (i64 i = 0; i < sigma0.value().numel(); ++i) CHECK(sigma0.value()[i] == doctest::Approx(expected));
    for (i64 i = 0; i < mu0.value().numel(); ++i) CHECK(mu0.value()[i] == 0.0f);
}

TEST_CASE("two assemblies from the same config and seed are identical") {
    ModelConfig cfg = preset_config("hybrid-s");
    Model<float> a(cfg, 42), b(cfg, 42);
    auto &pa = a.params(), &pb = b.params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].name == pb[i].name);
        CHECK(pa[i].var->shape() == pb[i].var->shape());
        CHECK(max_abs_diff(pa[i].var->value(), pb[i].var->value()) == 0.0);
    }
}

TEST_CASE("parameter counts are strictly ordered hybrid-s < hybrid-m < hybrid-l") {
    Model<float> s(preset_config("hybrid-s"), 1);
    Model<float> mm(preset_config("hybrid-m"), 1);
    Model<float> l(preset_config("hybrid-l"), 1);
    const i64 ps = s.total_param_count(), pm = mm.total_param_count(), pl = l.total_param_count();
    CHECK(ps < pm);
    CHECK(pm < pl);
    MESSAGE("params: hybrid-s=", ps, " hybrid-m=", pm, " hybrid-l=", pl);
}

TEST_CASE("fully-convolutional consistency: 16px shift commutes away from borders") {
    Rng rng(37);
    Model<float> m(desk_config("III"), 3);
    Tensor<float> src = Tensor<float>::uniform(Shape{1, 3, 448, 448}, rng, 0, 1);
    auto crop_src = [&](i64 off) {
        Tensor<float> t(Shape{1, 3, 384, 384});
        for (i64 c = 0; c < 3; ++c)
            for (i64 h = 0; h < 384; ++h)
                for (i64 w = 0; w < 384; ++w) t.at(0, c, h, w) = src.at(0, c, h + off, w + off);
        return t;
    };
    auto y1 = m.synthesize(m.analyze(Var<float>(crop_src(0)))).value();
    auto y2 = m.synthesize(m.analyze(Var<float>(crop_src(16)))).value();
    // interior band: conservative 160px theoretical-receptive-field margin
    const i64 b = 160;
    double worst = 0;
    for (i64 c = 0; c < 3; ++c)
        for (i64 h = b; h < 384 - b - 16; ++h)
            for (i64 w = b; w < 384 - b - 16; ++w)
                worst = std::max(worst, std::abs((double)y1.at(0, c, h + 16, w + 16) - (double)y2.at(0, c, h, w)));
    CHECK(worst < 1e-5);
}

TEST_CASE("invalid stage kind is rejected") {
    ModelConfig cfg = preset_config("hybrid-s");
    cfg.main_stages[1].kind = 'X';
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(Model<float>(cfg, 1), ConfigError);
}
