#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace s2c {

using i64 = std::int64_t;
using u64 = std::uint64_t;
using u32 = std::uint32_t;
using u16 = std::uint16_t;
using u8 = std::uint8_t;

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
/// Bad configuration (unknown preset, invalid stage kind, bad spec).
struct ConfigError : Error {
    using Error::Error;
};
/// Shape or parameter mismatch between tensors and specs.
struct ShapeError : Error {
    using Error::Error;
};
/// Unreadable/missing data (datasets, images, files).
struct DataError : Error {
    using Error::Error;
};
/// Entropy-coding failure (symbol outside support, truncated stream).
struct CodingError : Error {
    using Error::Error;
};
/// Header/variant/version mismatch between artifacts.
struct IncompatibilityError : Error {
    using Error::Error;
};

/// Deterministic RNG used across the library. One engine type everywhere so
/// serialized state round-trips exactly.
using Rng = std::mt19937_64;

struct Shape {
    i64 n = 1, c = 1, h = 1, w = 1;

    i64 numel() const { return n * c * h * w; }
    bool operator==(const Shape& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
    bool operator!=(const Shape& o) const { return !(*this == o); }
    std::string str() const;
};

/// Dense 4-D array in NCHW layout; the universal feature-map currency.
template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape s) : shape_(s), buf_(static_cast<size_t>(s.numel()), T(0)) {}
    Tensor(Shape s, T fill) : shape_(s), buf_(static_cast<size_t>(s.numel()), fill) {}

    static Tensor zeros(Shape s) { return Tensor(s); }
    static Tensor full(Shape s, T v) { return Tensor(s, v); }
    /// i.i.d. uniform in [lo, hi).
    static Tensor uniform(Shape s, Rng& rng, T lo = T(0), T hi = T(1));
    /// i.i.d. normal(mean, stddev).
    static Tensor normal(Shape s, Rng& rng, T mean = T(0), T stddev = T(1));

    const Shape& shape() const { return shape_; }
    i64 numel() const { return shape_.numel(); }
    bool defined() const { return !buf_.empty() || shape_.numel() == 0; }

    T* data() { return buf_.data(); }
    const T* data() const { return buf_.data(); }

    T& at(i64 n, i64 c, i64 h, i64 w) {
        return buf_[static_cast<size_t>(((n * shape_.c + c) * shape_.h + h) * shape_.w + w)];
    }
    const T& at(i64 n, i64 c, i64 h, i64 w) const {
        return buf_[static_cast<size_t>(((n * shape_.c + c) * shape_.h + h) * shape_.w + w)];
    }
    T& operator[](i64 i) { return buf_[static_cast<size_t>(i)]; }
    const T& operator[](i64 i) const { return buf_[static_cast<size_t>(i)]; }

    void fill(T v) { std::fill(buf_.begin(), buf_.end(), v); }
    void release() {
        buf_.clear();
        buf_.shrink_to_fit();
    }

    bool all_finite() const;
    T min() const;
    T max() const;
    double sum() const;

    /// Reinterpret the flat buffer under a new shape with the same element count.
    Tensor reshaped(Shape s) const;

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (i64 i = 0; i < numel(); ++i) out[i] = static_cast<U>(buf_[static_cast<size_t>(i)]);
        return out;
    }

private:
    Shape shape_{0, 0, 0, 0};
    std::vector<T> buf_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

/// Max |a-b| over all elements; tensors must share a shape.
template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

/// ||a-b|| / max(||a||, ||b||, eps) over flattened values.
template <typename T>
double rel_l2_diff(const Tensor<T>& a, const Tensor<T>& b, double eps = 1e-12);

}  // namespace s2c
