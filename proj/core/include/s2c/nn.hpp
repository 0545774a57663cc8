#pragma once

#include "s2c/ops.hpp"

namespace s2c {

/// Named reference to a trainable parameter; optimizer/serializer currency.
template <typename T>
struct ParamRef {
    std::string name;
    Var<T>* var;
};
template <typename T>
using ParamList = std::vector<ParamRef<T>>;

template <typename T>
i64 param_count(const ParamList<T>& params);

/// Fan-in uniform init bound, matching the common conv/linear default.
double init_bound(i64 fan_in);

template <typename T>
struct Conv2dLayer {
    Var<T> weight, bias;
    i64 stride = 1, pad = 0, groups = 1;

    Conv2dLayer() = default;
    Conv2dLayer(i64 cin, i64 cout, i64 k, i64 stride, i64 pad, Rng& rng, i64 groups = 1, bool with_bias = true);

    Var<T> operator()(const Var<T>& x) const { return conv2d(x, weight, bias, stride, pad, groups); }
    void collect(ParamList<T>& out, const std::string& prefix);
    i64 flops(i64 ho, i64 wo) const;  // 2 * k^2 * cin/g * cout * ho * wo
};

template <typename T>
struct ConvT2dLayer {
    Var<T> weight, bias;
    i64 stride = 2, pad = 0, out_pad = 0;

    ConvT2dLayer() = default;
    ConvT2dLayer(i64 cin, i64 cout, i64 k, i64 stride, i64 pad, i64 out_pad, Rng& rng, bool with_bias = true);

    Var<T> operator()(const Var<T>& x) const { return conv_transpose2d(x, weight, bias, stride, pad, out_pad); }
    void collect(ParamList<T>& out, const std::string& prefix);
    i64 flops(i64 hin, i64 win) const;
};

template <typename T>
struct LayerNormLayer {
    Var<T> gamma, beta;

    LayerNormLayer() = default;
    explicit LayerNormLayer(i64 channels);

    Var<T> operator()(const Var<T>& x) const { return layer_norm_chan(x, gamma, beta); }
    void collect(ParamList<T>& out, const std::string& prefix);
};

extern template struct Conv2dLayer<float>;
extern template struct Conv2dLayer<double>;
extern template struct ConvT2dLayer<float>;
extern template struct ConvT2dLayer<double>;
extern template struct LayerNormLayer<float>;
extern template struct LayerNormLayer<double>;
extern template i64 param_count(const ParamList<float>&);
extern template i64 param_count(const ParamList<double>&);

}  // namespace s2c
