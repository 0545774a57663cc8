#include "s2c/nn.hpp"

#include <cmath>

namespace s2c {

double init_bound(i64 fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

template <typename T>
i64 param_count(const ParamList<T>& params) {
    i64 n = 0;
    for (const auto& p : params) n += p.var->value().numel();
    return n;
}

template <typename T>
Conv2dLayer<T>::Conv2dLayer(i64 cin, i64 cout, i64 k, i64 stride_, i64 pad_, Rng& rng, i64 groups_, bool with_bias)
    : stride(stride_), pad(pad_), groups(groups_) {
    const double b = init_bound((cin / groups_) * k * k);
    weight = Var<T>(Tensor<T>::uniform(Shape{cout, cin / groups_, k, k}, rng, static_cast<T>(-b), static_cast<T>(b)),
                    true);
    if (with_bias)
        bias = Var<T>(Tensor<T>::uniform(Shape{1, cout, 1, 1}, rng, static_cast<T>(-b), static_cast<T>(b)), true);
}

template <typename T>
void Conv2dLayer<T>::collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight});
    if (bias.defined()) out.push_back({prefix + ".bias", &bias});
}

template <typename T>
i64 Conv2dLayer<T>::flops(i64 ho, i64 wo) const {
    const Shape ws = weight.shape();
    return 2 * ws.n * ws.c * ws.h * ws.w * ho * wo;
}

template <typename T>
ConvT2dLayer<T>::ConvT2dLayer(i64 cin, i64 cout, i64 k, i64 stride_, i64 pad_, i64 out_pad_, Rng& rng, bool with_bias)
    : stride(stride_), pad(pad_), out_pad(out_pad_) {
    const double b = init_bound(cin * k * k);
    weight = Var<T>(Tensor<T>::uniform(Shape{cin, cout, k, k}, rng, static_cast<T>(-b), static_cast<T>(b)), true);
    if (with_bias)
        bias = Var<T>(Tensor<T>::uniform(Shape{1, cout, 1, 1}, rng, static_cast<T>(-b), static_cast<T>(b)), true);
}

template <typename T>
void ConvT2dLayer<T>::collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight});
    if (bias.defined()) out.push_back({prefix + ".bias", &bias});
}

template <typename T>
i64 ConvT2dLayer<T>::flops(i64 hin, i64 win) const {
    const Shape ws = weight.shape();
    return 2 * ws.n * ws.c * ws.h * ws.w * hin * win;
}

template <typename T>
LayerNormLayer<T>::LayerNormLayer(i64 channels) {
    gamma = Var<T>(Tensor<T>::full(Shape{1, channels, 1, 1}, T(1)), true);
    beta = Var<T>(Tensor<T>::zeros(Shape{1, channels, 1, 1}), true);
}

template <typename T>
void LayerNormLayer<T>::collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".gamma", &gamma});
    out.push_back({prefix + ".beta", &beta});
}

template struct Conv2dLayer<float>;
template struct Conv2dLayer<double>;
template struct ConvT2dLayer<float>;
template struct ConvT2dLayer<double>;
template struct LayerNormLayer<float>;
template struct LayerNormLayer<double>;
template i64 param_count(const ParamList<float>&);
template i64 param_count(const ParamList<double>&);

}  // namespace s2c
