#pragma once

#include "s2c/blocks.hpp"

namespace s2c {

enum class ContextMode { hyperprior_only, scctx };
enum class QuantMode { train, eval };

ContextMode context_mode_from_string(const std::string& s);
std::string to_string(ContextMode m);

/// Likelihood floor shared by rate estimation and the 16-bit codec tables.
inline constexpr double kLikelihoodFloor = 1.0 / 65536.0;
/// Floor added to the positive sigma mapping.
inline constexpr double kSigmaFloor = 1e-6;

struct EntropyConfig {
    ContextMode mode = ContextMode::scctx;
    i64 num_groups = 5;
    std::vector<i64> group_widths;  ///< empty -> derived from latent channels
    bool checkerboard = true;
    i64 hyper_channels = 192;
    i64 hyper_blocks = 1;
    i64 ctx_channels = 96;  ///< channel/spatial context feature width
    i64 agg_channels = 256; ///< aggregation trunk width

    /// Uneven doubling split of `latent` into `groups` widths (last takes the rest).
    static std::vector<i64> default_group_widths(i64 latent, i64 groups);
    void resolve(i64 latent_channels);
    void validate(i64 latent_channels) const;
};

// ---- quantization -----------------------------------------------------------

/// Evaluation quantizer: round(y - mu) + mu, ties away from zero.
template <typename T>
Tensor<T> quantize_eval(const Tensor<T>& y, const Tensor<T>& mu);

/// Training-mode pair per the rate/distortion path split.
template <typename T>
struct QuantizedPair {
    Var<T> rate_path;  ///< y + u, u ~ U[-0.5, 0.5)
    Var<T> data_path;  ///< mu + ste_round(y - mu)
};

/// Spec-facing quantize: eval mode wraps quantize_eval, train mode returns the
/// noise/STE pair (both entries equal in eval mode).
template <typename T>
QuantizedPair<T> quantize(const Var<T>& y, const Var<T>& mu, QuantMode mode, Rng& rng);

// ---- Gaussian conditional ----------------------------------------------------

/// P(round bin of delta) under N(0, sigma^2) with half-open integer bins.
/// floor = 0 gives the raw discretized Gaussian; rate paths use kLikelihoodFloor.
template <typename T>
Tensor<T> gaussian_bin_probability(const Tensor<T>& delta, const Tensor<T>& sigma, double floor = 0.0);

/// Differentiable -log2 likelihood of y_tilde under N(mu, sigma^2), floored.
template <typename T>
Var<T> gaussian_bits(const Var<T>& y_tilde, const Var<T>& mu, const Var<T>& sigma);

/// Positive mapping for raw sigma predictions: softplus(x) + kSigmaFloor.
template <typename T>
Var<T> sigma_positive(const Var<T>& raw);

// ---- factorized prior --------------------------------------------------------

/// Per-channel monotone CDF (4 stacked 3-wide monotone layers), the learned
/// density for hyper-latents.
template <typename T>
struct FactorizedPrior {
    i64 channels = 0;
    // grouped 1x1 filters; softplus applied to weights on use keeps CDF monotone
    Var<T> w0, b0, a0;  // 1 -> 3
    Var<T> w1, b1, a1;  // 3 -> 3
    Var<T> w2, b2, a2;  // 3 -> 3
    Var<T> w3, b3;      // 3 -> 1

    FactorizedPrior() = default;
    FactorizedPrior(i64 channels, Rng& rng);

    /// CDF evaluated elementwise; strictly increasing in x, range (0,1).
    Var<T> cdf(const Var<T>& x) const;
    /// Differentiable -log2 P(bin of z_tilde), floored at kLikelihoodFloor.
    Var<T> bits(const Var<T>& z_tilde) const;
    /// Raw bin probability at integer points (no floor), eval only.
    Tensor<T> bin_probability(const Tensor<T>& z) const;

    void collect(ParamList<T>& out, const std::string& prefix);
};

// ---- space-channel context nets -----------------------------------------------

/// Networks predicting (mu, sigma_raw) for one channel group from the hyper
/// feature, previously decoded groups, and same-group anchors.
template <typename T>
struct GroupContextNets {
    i64 group_width = 0;
    bool has_channel_ctx = false;
    Conv2dLayer<T> ch_in;       // 5x5 over concat of previous groups
    S2CBlock<T> ch_block;       // context mining: sepconv-style block
    Conv2dLayer<T> sp_in;       // 5x5 over anchor-masked current group
    Conv2dLayer<T> agg_in;      // 1x1 trunk over [hyper | ch | sp]
    S2CBlock<T> agg_block;      // parameter aggregation: identity-style block
    Conv2dLayer<T> agg_out;     // 1x1 to 2 * group_width

    void collect(ParamList<T>& out, const std::string& prefix);
};

/// Checkerboard phase mask as a full-shape 0/1 tensor.
/// anchor phase: (h + w) even. When checkerboarding is off the anchor mask is
/// all ones and the non-anchor phase is empty.
template <typename T>
Tensor<T> checkerboard_mask(Shape s, bool anchor, bool checkerboard_enabled);

extern template struct FactorizedPrior<float>;
extern template struct FactorizedPrior<double>;
extern template struct GroupContextNets<float>;
extern template struct GroupContextNets<double>;

}  // namespace s2c
