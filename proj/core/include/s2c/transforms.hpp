#pragma once

#include <array>
#include <optional>

#include "s2c/entropy.hpp"
#include "s2c/profiler.hpp"

namespace s2c {

struct StageSpec {
    char kind = 'C';  ///< 'C' sepconv, 'A' attention, 'I' identity
    i64 num_blocks = 3;
    i64 channels = 192;

    SpatialKind spatial_kind() const;
    void validate() const;
};

struct ModelConfig {
    std::string variant_name = "custom";
    std::array<StageSpec, 3> main_stages{StageSpec{'C', 3, 192}, StageSpec{'A', 3, 192}, StageSpec{'A', 3, 192}};
    i64 latent_channels = 320;
    FfnKind ffn = FfnKind::gated;
    i64 window_size = 8;
    i64 dw_kernel = 5;
    i64 expansion_ratio = 4;
    i64 head_dim = 32;       ///< heads = channels / head_dim when divisible
    bool ffn_enabled = true; ///< false only for the channel-aggregation ablation
    EntropyConfig entropy;

    void validate() const;
    i64 heads_for(i64 channels) const;
    std::string stage_arrangement() const;  // e.g. "CAA"
};

/// Named presets: s2c-identity, s2c-conv, s2c-attention, hybrid-s/m/l/t and the
/// stage-arrangement ablations arrangement-{ccc,aaa,acc,cca,caa}.
ModelConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();
/// Stable one-byte id for the bitstream header (255 = custom).
u8 variant_id(const std::string& variant_name);

/// Pads H and W up to multiples of 64 with symmetric extension.
template <typename T>
Var<T> pad_input(const Var<T>& x);
inline i64 padded_dim(i64 d) { return (d + 63) / 64 * 64; }

template <typename T>
struct ScctxSlice {
    Tensor<T> mu, sigma;
};

/// Full codec model: analysis/synthesis transforms, hyper transforms, and the
/// entropy parameter networks, assembled from a ModelConfig.
template <typename T>
class Model {
public:
    Model() = default;
    Model(const ModelConfig& cfg, u64 seed);

    const ModelConfig& config() const { return cfg_; }
    ParamList<T>& params() { return params_; }
    i64 total_param_count() { return param_count(params_); }

    /// x must already be padded to /64 dims (see pad_input).
    Var<T> analyze(const Var<T>& x, ModelProfile* prof = nullptr) const;
    Var<T> synthesize(const Var<T>& y_hat, ModelProfile* prof = nullptr) const;
    Var<T> hyper_analyze(const Var<T>& y, ModelProfile* prof = nullptr) const;
    /// Raw hyper-decoder output, 2*latent_channels wide.
    Var<T> hyper_feature(const Var<T>& z_hat, ModelProfile* prof = nullptr) const;
    /// (mu, sigma) split of the hyper feature with the positive sigma map.
    std::pair<Var<T>, Var<T>> hyper_synthesize(const Var<T>& z_hat) const;

    const FactorizedPrior<T>& prior() const { return prior_; }
    FactorizedPrior<T>& prior() { return prior_; }

    // ---- SCCTX surface ----
    i64 num_groups() const { return static_cast<i64>(cfg_.entropy.group_widths.size()); }
    i64 group_offset(i64 g) const;
    i64 group_width(i64 g) const { return cfg_.entropy.group_widths[static_cast<size_t>(g)]; }

    /// (mu, sigma_raw) for one group given hyper feature, previously decoded
    /// groups (concatenated in order; undefined for g=0) and the anchor-masked
    /// current group (undefined during the anchor phase).
    Var<T> group_param_raw(i64 g, const Var<T>& hyper_feat, const Var<T>& prev_groups,
                           const Var<T>& anchor_masked, ModelProfile* prof = nullptr) const;

    /// Eval-mode (mu, sigma) for a group/phase; the spec's scctx_parameters.
    /// decoded_groups holds groups 0..g-1; anchors of group g are consulted only
    /// when anchor_phase is false (non-anchor positions of y_hat_g).
    ScctxSlice<T> scctx_parameters(i64 g, bool anchor_phase, const Tensor<T>& z_hat,
                                   const std::vector<Tensor<T>>& decoded_groups,
                                   const Tensor<T>* y_hat_g_anchors) const;

    /// Shape of y for an input of (h, w) after padding.
    Shape latent_shape(i64 n, i64 h, i64 w) const;
    Shape hyper_shape(i64 n, i64 h, i64 w) const;

    i64 flops(i64 h, i64 w) const;  ///< analysis+synthesis+hyper, padded input (h,w)

    void collect(ParamList<T>& out);

private:
    ModelConfig cfg_;
    // analysis
    Conv2dLayer<T> down_[4];
    std::array<std::vector<S2CBlock<T>>, 3> enc_stages_;
    Conv2dLayer<T> to_latent_;
    // synthesis
    Conv2dLayer<T> from_latent_;
    std::array<std::vector<S2CBlock<T>>, 3> dec_stages_;
    ConvT2dLayer<T> up_[4];
    // hyper
    Conv2dLayer<T> ha_down1_, ha_down2_;
    std::vector<S2CBlock<T>> ha_blocks_;
    ConvT2dLayer<T> hs_up1_, hs_up2_;
    std::vector<S2CBlock<T>> hs_blocks_;
    // entropy
    FactorizedPrior<T> prior_;
    std::vector<GroupContextNets<T>> group_nets_;
    ParamList<T> params_;

    BlockSpec block_spec(SpatialKind kind, i64 channels) const;
    Var<T> run_stage(const std::vector<S2CBlock<T>>& blocks, Var<T> x, StageTimings* t) const;
};

extern template class Model<float>;
extern template class Model<double>;
extern template Var<float> pad_input(const Var<float>&);
extern template Var<double> pad_input(const Var<double>&);

}  // namespace s2c
