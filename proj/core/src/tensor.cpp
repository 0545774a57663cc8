#include "s2c/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace s2c {

std::string Shape::str() const {
    std::ostringstream os;
    os << "(" << n << "," << c << "," << h << "," << w << ")";
    return os.str();
}

template <typename T>
Tensor<T> Tensor<T>::uniform(Shape s, Rng& rng, T lo, T hi) {
    Tensor out(s);
    std::uniform_real_distribution<double> d(static_cast<double>(lo), static_cast<double>(hi));
    for (i64 i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(d(rng));
    return out;
}

template <typename T>
Tensor<T> Tensor<T>::normal(Shape s, Rng& rng, T mean, T stddev) {
    Tensor out(s);
    std::normal_distribution<double> d(static_cast<double>(mean), static_cast<double>(stddev));
    for (i64 i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(d(rng));
    return out;
}

template <typename T>
bool Tensor<T>::all_finite() const {
    for (i64 i = 0; i < numel(); ++i)
        if (!std::isfinite(static_cast<double>(buf_[static_cast<size_t>(i)]))) return false;
    return true;
}

template <typename T>
T Tensor<T>::min() const {
    return *std::min_element(buf_.begin(), buf_.end());
}

template <typename T>
T Tensor<T>::max() const {
    return *std::max_element(buf_.begin(), buf_.end());
}

template <typename T>
double Tensor<T>::sum() const {
    double s = 0;
    for (i64 i = 0; i < numel(); ++i) s += static_cast<double>(buf_[static_cast<size_t>(i)]);
    return s;
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape s) const {
    if (s.numel() != numel()) throw ShapeError("reshape: element count mismatch " + shape_.str() + " -> " + s.str());
    Tensor out = *this;
    out.shape_ = s;
    return out;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw ShapeError("max_abs_diff: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    double m = 0;
    for (i64 i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

template <typename T>
double rel_l2_diff(const Tensor<T>& a, const Tensor<T>& b, double eps) {
    if (a.shape() != b.shape()) throw ShapeError("rel_l2_diff: shape mismatch");
    double na = 0, nb = 0, nd = 0;
    for (i64 i = 0; i < a.numel(); ++i) {
        double x = a[i], y = b[i];
        na += x * x;
        nb += y * y;
        nd += (x - y) * (x - y);
    }
    return std::sqrt(nd) / std::max({std::sqrt(na), std::sqrt(nb), eps});
}

template class Tensor<float>;
template class Tensor<double>;
template double max_abs_diff(const Tensor<float>&, const Tensor<float>&);
template double max_abs_diff(const Tensor<double>&, const Tensor<double>&);
template double rel_l2_diff(const Tensor<float>&, const Tensor<float>&, double);
template double rel_l2_diff(const Tensor<double>&, const Tensor<double>&, double);

}  // namespace s2c
