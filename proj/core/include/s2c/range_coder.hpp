#pragma once

#include <vector>

#include "s2c/tensor.hpp"

namespace s2c {

/// Quantized CDF over a finite alphabet: 16-bit total frequency, every symbol
/// gets at least one count of mass.
struct CdfTable {
    std::vector<u32> cum;  ///< size n+1, cum[0]=0, cum[n]=65536, strictly increasing

    i64 size() const { return static_cast<i64>(cum.size()) - 1; }
    u32 freq(i64 s) const { return cum[static_cast<size_t>(s) + 1] - cum[static_cast<size_t>(s)]; }

    /// Quantize a probability vector into counts summing to 65536 (each >= 1).
    static CdfTable from_probabilities(const std::vector<double>& p);
    /// Flat table: n equal-frequency symbols (n must divide 65536).
    static CdfTable uniform(i64 n);
};

inline constexpr u32 kCdfTotalBits = 16;
inline constexpr u32 kCdfTotal = 1u << kCdfTotalBits;

/// Byte-oriented range coder (32-bit range, boundary-clamp renormalization, no
/// carry propagation). Encoder and decoder evolve low/range identically.
class RangeEncoder {
public:
    void encode(u32 cum_lo, u32 freq);
    void encode_symbol(const CdfTable& t, i64 s);
    /// Raw 16-bit value through two flat byte tables (for escape payloads).
    void encode_raw16(u32 v);
    std::vector<u8> finish();

private:
    void renorm();
    u32 low_ = 0;
    u32 range_ = 0xFFFFFFFFu;
    std::vector<u8> out_;
};

class RangeDecoder {
public:
    explicit RangeDecoder(const std::vector<u8>& bytes);

    i64 decode_symbol(const CdfTable& t);
    u32 decode_raw16();
    /// True if the decoder ever read past the end of the stream.
    bool exhausted() const { return exhausted_; }

private:
    void update(u32 cum_lo, u32 freq);
    void renorm();
    u8 next_byte();
    const std::vector<u8>& bytes_;
    size_t pos_ = 0;
    bool exhausted_ = false;
    u32 low_ = 0;
    u32 range_ = 0xFFFFFFFFu;
    u32 code_ = 0;
};

/// Spec-surface helpers: one table per symbol position.
std::vector<u8> range_encode(const std::vector<i64>& symbols, const std::vector<const CdfTable*>& cdfs);
std::vector<i64> range_decode(const std::vector<u8>& stream, const std::vector<const CdfTable*>& cdfs);

}  // namespace s2c
