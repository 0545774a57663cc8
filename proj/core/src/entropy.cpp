#include "s2c/entropy.hpp"

#include <cmath>

namespace s2c {

ContextMode context_mode_from_string(const std::string& s) {
    if (s == "hyperprior_only") return ContextMode::hyperprior_only;
    if (s == "scctx") return ContextMode::scctx;
    throw ConfigError("unknown context mode: " + s);
}

std::string to_string(ContextMode m) {
    return m == ContextMode::hyperprior_only ? "hyperprior_only" : "scctx";
}

std::vector<i64> EntropyConfig::default_group_widths(i64 latent, i64 groups) {
    if (groups < 1) throw ConfigError("num_groups must be >= 1");
    if (groups == 1) return {latent};
    if (latent < 2 * groups) throw ConfigError("latent channels too small for requested group count");
    // Uneven doubling split in the 1:1:2:4:... pattern; the last group absorbs
    // the remainder (320/5 -> 16,16,32,64,192).
    std::vector<i64> w(static_cast<size_t>(groups));
    i64 used = 0;
    for (i64 i = 0; i + 1 < groups; ++i) {
        const i64 prop = i64(1) << std::max<i64>(0, i - 1);
        i64 wi = latent * prop / 20;
        wi = std::max<i64>(wi, 1);
        wi = std::min(wi, latent - used - (groups - 1 - i));
        w[static_cast<size_t>(i)] = wi;
        used += wi;
    }
    w[static_cast<size_t>(groups - 1)] = latent - used;
    return w;
}

void EntropyConfig::resolve(i64 latent_channels) {
    if (mode == ContextMode::hyperprior_only) {
        group_widths = {latent_channels};
        num_groups = 1;
        checkerboard = false;
        return;
    }
    if (group_widths.empty()) group_widths = default_group_widths(latent_channels, num_groups);
    num_groups = static_cast<i64>(group_widths.size());
}

void EntropyConfig::validate(i64 latent_channels) const {
    if (group_widths.empty()) throw ConfigError("EntropyConfig: group widths unresolved");
    i64 sum = 0;
    for (i64 w : group_widths) {
        if (w < 1) throw ConfigError("EntropyConfig: group width must be >= 1");
        sum += w;
    }
    if (sum != latent_channels) throw ConfigError("EntropyConfig: group widths must partition the latent channels");
    if (hyper_channels < 1 || ctx_channels < 1 || agg_channels < 1) throw ConfigError("EntropyConfig: bad widths");
}

template <typename T>
Tensor<T> quantize_eval(const Tensor<T>& y, const Tensor<T>& mu) {
    if (y.shape() != mu.shape()) throw ShapeError("quantize_eval: shape mismatch");
    Tensor<T> out(y.shape());
    for (i64 i = 0; i < y.numel(); ++i) out[i] = std::round(y[i] - mu[i]) + mu[i];
    return out;
}

template <typename T>
QuantizedPair<T> quantize(const Var<T>& y, const Var<T>& mu, QuantMode mode, Rng& rng) {
    if (mode == QuantMode::eval) {
        Var<T> q = constant(quantize_eval(y.value(), mu.value()));
        return {q, q};
    }
    Var<T> rate = add_uniform_noise(y, rng);                // (y - mu) + u + mu == y + u
    Var<T> data = add(mu, ste_round(sub(y, mu)));
    return {rate, data};
}

template <typename T>
Tensor<T> gaussian_bin_probability(const Tensor<T>& delta, const Tensor<T>& sigma, double floor) {
    if (delta.shape() != sigma.shape()) throw ShapeError("gaussian_bin_probability: shape mismatch");
    Tensor<T> out(delta.shape());
    const double inv_sqrt2 = 0.7071067811865476;
    for (i64 i = 0; i < out.numel(); ++i) {
        const double s = static_cast<double>(sigma[i]);
        if (!(s > 0)) throw Error("gaussian_bin_probability: sigma must be positive");
        const double d = static_cast<double>(delta[i]);
        const double hi = std::erf((d + 0.5) / s * inv_sqrt2);
        const double lo = std::erf((d - 0.5) / s * inv_sqrt2);
        out[i] = static_cast<T>(std::max(0.5 * (hi - lo), floor));
    }
    return out;
}

template <typename T>
Var<T> gaussian_bits(const Var<T>& y_tilde, const Var<T>& mu, const Var<T>& sigma) {
    Var<T> delta = sub(y_tilde, mu);
    Var<T> denom = scale(sigma, std::sqrt(2.0));
    Var<T> hi = erf_op(div(add_const(delta, 0.5), denom));
    Var<T> lo = erf_op(div(add_const(delta, -0.5), denom));
    Var<T> p = scale(sub(hi, lo), 0.5);
    return scale(log_op(clamp_min(p, kLikelihoodFloor)), -1.4426950408889634);
}

template <typename T>
Var<T> sigma_positive(const Var<T>& raw) {
    return add_const(softplus(raw), kSigmaFloor);
}

template <typename T>
FactorizedPrior<T>::FactorizedPrior(i64 c, Rng& rng) : channels(c) {
    // softplus(w) starts at 1/(scale*width) so the initial CDF is a smooth
    // sigmoid spread over roughly +-init_scale/2.
    const double init_scale = 10.0;
    const double factor = std::pow(init_scale, 0.25);
    auto winit = [&](i64 width) { return static_cast<T>(std::log(std::expm1(1.0 / factor / width))); };
    w0 = Var<T>(Tensor<T>::full(Shape{3 * c, 1, 1, 1}, winit(3)), true);
    w1 = Var<T>(Tensor<T>::full(Shape{3 * c, 3, 1, 1}, winit(3)), true);
    w2 = Var<T>(Tensor<T>::full(Shape{3 * c, 3, 1, 1}, winit(3)), true);
    w3 = Var<T>(Tensor<T>::full(Shape{c, 3, 1, 1}, winit(1)), true);
    b0 = Var<T>(Tensor<T>::uniform(Shape{1, 3 * c, 1, 1}, rng, T(-0.5), T(0.5)), true);
    b1 = Var<T>(Tensor<T>::uniform(Shape{1, 3 * c, 1, 1}, rng, T(-0.5), T(0.5)), true);
    b2 = Var<T>(Tensor<T>::uniform(Shape{1, 3 * c, 1, 1}, rng, T(-0.5), T(0.5)), true);
    b3 = Var<T>(Tensor<T>::uniform(Shape{1, c, 1, 1}, rng, T(-0.5), T(0.5)), true);
    a0 = Var<T>(Tensor<T>::zeros(Shape{1, 3 * c, 1, 1}), true);
    a1 = Var<T>(Tensor<T>::zeros(Shape{1, 3 * c, 1, 1}), true);
    a2 = Var<T>(Tensor<T>::zeros(Shape{1, 3 * c, 1, 1}), true);
}

template <typename T>
Var<T> FactorizedPrior<T>::cdf(const Var<T>& x) const {
    if (x.shape().c != channels) throw ShapeError("FactorizedPrior: channel mismatch");
    Var<T> none;
    auto gate = [&](const Var<T>& h, const Var<T>& a) { return add(h, mul(tanh_op(h), tanh_op(a))); };
    Var<T> h0 = add(conv2d(x, softplus(w0), none, 1, 0, channels), b0);
    Var<T> u0 = gate(h0, a0);
    Var<T> h1 = add(conv2d(u0, softplus(w1), none, 1, 0, channels), b1);
    Var<T> u1 = gate(h1, a1);
    Var<T> h2 = add(conv2d(u1, softplus(w2), none, 1, 0, channels), b2);
    Var<T> u2 = gate(h2, a2);
    Var<T> logits = add(conv2d(u2, softplus(w3), none, 1, 0, channels), b3);
    return sigmoid(logits);
}

template <typename T>
Var<T> FactorizedPrior<T>::bits(const Var<T>& z_tilde) const {
    Var<T> p = sub(cdf(add_const(z_tilde, 0.5)), cdf(add_const(z_tilde, -0.5)));
    return scale(log_op(clamp_min(p, kLikelihoodFloor)), -1.4426950408889634);
}

template <typename T>
Tensor<T> FactorizedPrior<T>::bin_probability(const Tensor<T>& z) const {
    Var<T> zc = constant(z);
    Var<T> p = sub(cdf(add_const(zc, 0.5)), cdf(add_const(zc, -0.5)));
    return p.value();
}

template <typename T>
void FactorizedPrior<T>::collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".w0", &w0});
    out.push_back({prefix + ".b0", &b0});
    out.push_back({prefix + ".a0", &a0});
    out.push_back({prefix + ".w1", &w1});
    out.push_back({prefix + ".b1", &b1});
    out.push_back({prefix + ".a1", &a1});
    out.push_back({prefix + ".w2", &w2});
    out.push_back({prefix + ".b2", &b2});
    out.push_back({prefix + ".a2", &a2});
    out.push_back({prefix + ".w3", &w3});
    out.push_back({prefix + ".b3", &b3});
}

template <typename T>
void GroupContextNets<T>::collect(ParamList<T>& out, const std::string& prefix) {
    if (has_channel_ctx) {
        ch_in.collect(out, prefix + ".ch_in");
        ch_block.collect(out, prefix + ".ch_block");
    }
    if (sp_in.weight.defined()) sp_in.collect(out, prefix + ".sp_in");
    agg_in.collect(out, prefix + ".agg_in");
    agg_block.collect(out, prefix + ".agg_block");
    agg_out.collect(out, prefix + ".agg_out");
}

template <typename T>
Tensor<T> checkerboard_mask(Shape s, bool anchor, bool checkerboard_enabled) {
    Tensor<T> m(s);
    if (!checkerboard_enabled) {
        if (anchor) m.fill(T(1));
        return m;
    }
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c)
            for (i64 h = 0; h < s.h; ++h)
                for (i64 w = 0; w < s.w; ++w) {
                    const bool is_anchor = ((h + w) % 2 == 0);
                    m.at(n, c, h, w) = (is_anchor == anchor) ? T(1) : T(0);
                }
    return m;
}

#define S2C_INSTANTIATE(T)                                                                        \
    template Tensor<T> quantize_eval(const Tensor<T>&, const Tensor<T>&);                         \
    template QuantizedPair<T> quantize(const Var<T>&, const Var<T>&, QuantMode, Rng&);            \
    template Tensor<T> gaussian_bin_probability(const Tensor<T>&, const Tensor<T>&, double);      \
    template Var<T> gaussian_bits(const Var<T>&, const Var<T>&, const Var<T>&);                   \
    template Var<T> sigma_positive(const Var<T>&);                                                \
    template Tensor<T> checkerboard_mask(Shape, bool, bool);

S2C_INSTANTIATE(float)
S2C_INSTANTIATE(double)
#undef S2C_INSTANTIATE

template struct FactorizedPrior<float>;
template struct FactorizedPrior<double>;
template struct GroupContextNets<float>;
template struct GroupContextNets<double>;

}  // namespace s2c
