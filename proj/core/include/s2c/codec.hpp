#pragma once

#include "s2c/range_coder.hpp"
#include "s2c/transforms.hpp"

namespace s2c {

/// 64 log-spaced coding scales; sigma values are snapped to the nearest table
/// entry in log space so encoder and decoder share finite CDF tables.
class ScaleTable {
public:
    static constexpr i64 kNumScales = 64;
    static constexpr double kMinScale = 0.11;
    static constexpr double kMaxScale = 256.0;

    ScaleTable();
    i64 index_for(double sigma) const;
    double scale_at(i64 i) const { return scales_[static_cast<size_t>(i)]; }

private:
    std::array<double, kNumScales> scales_{};
    std::array<double, kNumScales> log_scales_{};
};

/// Symbol layout for residual coding: values in [-radius, radius] map to
/// [0, 2*radius]; one trailing escape symbol covers both tails, followed by a
/// raw 32-bit payload.
struct ResidualAlphabet {
    i64 radius = 0;
    CdfTable table;  ///< 2*radius + 2 symbols

    i64 escape_symbol() const { return 2 * radius + 1; }
};

/// Per-scale discretized-Gaussian tables (built once per model).
class GaussianCdfSet {
public:
    explicit GaussianCdfSet(const ScaleTable& scales);
    const ResidualAlphabet& alphabet(i64 scale_index) const { return alphabets_[static_cast<size_t>(scale_index)]; }

private:
    std::vector<ResidualAlphabet> alphabets_;
};

/// Per-channel tables for the learned factorized prior.
template <typename T>
class FactorizedCdfSet {
public:
    FactorizedCdfSet() = default;
    explicit FactorizedCdfSet(const FactorizedPrior<T>& prior);
    const ResidualAlphabet& alphabet(i64 channel) const { return alphabets_[static_cast<size_t>(channel)]; }
    i64 offset(i64 channel) const { return offsets_[static_cast<size_t>(channel)]; }  ///< value of symbol 0

private:
    std::vector<ResidualAlphabet> alphabets_;
    std::vector<i64> offsets_;
};

/// On-disk compressed object (.s2c).
struct CompressedObject {
    static constexpr char kMagic[4] = {'S', '2', 'C', '1'};
    u8 version = 1;
    u8 variant = 255;
    u8 lambda_index = 255;
    u32 orig_height = 0, orig_width = 0;
    u32 padded_height = 0, padded_width = 0;
    std::vector<u8> z_stream;
    std::vector<std::vector<u8>> y_streams;  ///< one per group x phase, coding order

    std::vector<u8> serialize() const;
    static CompressedObject deserialize(const std::vector<u8>& bytes);
    i64 total_bytes() const;
    double bpp() const { return static_cast<double>(total_bytes()) * 8.0 / (static_cast<double>(orig_height) * orig_width); }
    static i64 header_bytes() { return 4 + 3 + 4 * 4; }
};

struct CompressStats {
    double bpp = 0;
    double bpp_estimate = 0;  ///< likelihood-based estimate on the same latents
    double enc_seconds = 0;
};

/// Reusable coding context: tables derived from one model.
template <typename T>
class Coder {
public:
    explicit Coder(Model<T>& model, u8 lambda_index = 255);

    CompressedObject compress(const Tensor<T>& image, CompressStats* stats = nullptr) const;
    Tensor<T> decompress(const CompressedObject& obj) const;

    /// Latents as coded (for round-trip harnesses): returns y_hat and z_hat.
    std::pair<Tensor<T>, Tensor<T>> code_latents(const Tensor<T>& image) const;
    std::pair<Tensor<T>, Tensor<T>> decode_latents(const CompressedObject& obj) const;

    const Model<T>& model() const { return *model_; }

private:
    void encode_group_slice(RangeEncoder& enc, const Tensor<T>& y_slice, const Tensor<T>& mu, const Tensor<T>& sigma,
                            const Tensor<T>& mask, Tensor<T>& y_hat_slice, double* est_bits) const;
    void decode_group_slice(RangeDecoder& dec, const Tensor<T>& mu, const Tensor<T>& sigma, const Tensor<T>& mask,
                            Tensor<T>& y_hat_slice) const;

    Model<T>* model_;
    u8 lambda_index_;
    ScaleTable scales_;
    GaussianCdfSet gaussian_;
    FactorizedCdfSet<T> factorized_;
};

/// Estimated (bpp_y, bpp_z) from eval-mode likelihoods on given latents.
template <typename T>
struct RateEstimate {
    double bpp_y = 0, bpp_z = 0;
    double total() const { return bpp_y + bpp_z; }
};

template <typename T>
RateEstimate<T> rate_estimate(Model<T>& model, const Tensor<T>& image);

extern template class Coder<float>;
extern template class Coder<double>;
extern template class FactorizedCdfSet<float>;
extern template class FactorizedCdfSet<double>;
extern template RateEstimate<float> rate_estimate(Model<float>&, const Tensor<float>&);
extern template RateEstimate<double> rate_estimate(Model<double>&, const Tensor<double>&);

}  // namespace s2c
