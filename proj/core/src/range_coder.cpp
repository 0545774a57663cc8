#include "s2c/range_coder.hpp"

#include <algorithm>
#include <cmath>

namespace s2c {

namespace {
constexpr u32 kTop = 1u << 24;
constexpr u32 kBot = 1u << 16;
}  // namespace

CdfTable CdfTable::from_probabilities(const std::vector<double>& p) {
    const i64 n = static_cast<i64>(p.size());
    if (n < 1) throw CodingError("CdfTable: empty alphabet");
    std::vector<i64> counts(static_cast<size_t>(n));
    double total = 0;
    for (double v : p) {
        if (!(v >= 0) || !std::isfinite(v)) throw CodingError("CdfTable: probabilities must be finite and >= 0");
        total += v;
    }
    if (total <= 0) total = 1;
    i64 sum = 0;
    for (i64 i = 0; i < n; ++i) {
        i64 c = static_cast<i64>(std::llround(p[static_cast<size_t>(i)] / total * kCdfTotal));
        c = std::max<i64>(c, 1);
        counts[static_cast<size_t>(i)] = c;
        sum += c;
    }
    // Re-balance to exactly 2^16, stealing from / giving to the largest bins.
    while (sum != kCdfTotal) {
        auto it = std::max_element(counts.begin(), counts.end());
        if (sum > kCdfTotal) {
            const i64 excess = sum - kCdfTotal;
            const i64 take = std::min(excess, *it - 1);
            if (take <= 0) throw CodingError("CdfTable: alphabet too large for 16-bit total");
            *it -= take;
            sum -= take;
        } else {
            *it += kCdfTotal - sum;
            sum = kCdfTotal;
        }
    }
    CdfTable t;
    t.cum.resize(static_cast<size_t>(n) + 1, 0);
    for (i64 i = 0; i < n; ++i) t.cum[static_cast<size_t>(i) + 1] = t.cum[static_cast<size_t>(i)] + static_cast<u32>(counts[static_cast<size_t>(i)]);
    return t;
}

CdfTable CdfTable::uniform(i64 n) {
    if (n < 1 || kCdfTotal % static_cast<u32>(n) != 0) throw CodingError("CdfTable::uniform: n must divide 65536");
    CdfTable t;
    t.cum.resize(static_cast<size_t>(n) + 1);
    const u32 f = kCdfTotal / static_cast<u32>(n);
    for (i64 i = 0; i <= n; ++i) t.cum[static_cast<size_t>(i)] = static_cast<u32>(i) * f;
    return t;
}

void RangeEncoder::renorm() {
    for (;;) {
        if ((low_ ^ (low_ + range_ - 1)) < kTop) {
            // top byte settled
        } else if (range_ < kBot) {
            // interval straddles a 2^24 boundary with a small range: clamp the
            // range to the next 2^16 boundary so no carry can ever occur
            range_ = kBot - (low_ & (kBot - 1));
        } else {
            return;
        }
        out_.push_back(static_cast<u8>(low_ >> 24));
        low_ <<= 8;
        range_ <<= 8;
    }
}

void RangeEncoder::encode(u32 cum_lo, u32 freq) {
    const u32 r = range_ >> kCdfTotalBits;
    low_ += cum_lo * r;
    range_ = freq * r;
    renorm();
}

void RangeEncoder::encode_symbol(const CdfTable& t, i64 s) {
    if (s < 0 || s >= t.size()) throw CodingError("range encoder: symbol outside table support");
    encode(t.cum[static_cast<size_t>(s)], t.freq(s));
}

void RangeEncoder::encode_raw16(u32 v) {
    static const CdfTable bytes = CdfTable::uniform(256);
    encode_symbol(bytes, (v >> 8) & 0xFF);
    encode_symbol(bytes, v & 0xFF);
}

std::vector<u8> RangeEncoder::finish() {
    for (int i = 0; i < 4; ++i) {
        out_.push_back(static_cast<u8>(low_ >> 24));
        low_ <<= 8;
    }
    return std::move(out_);
}

RangeDecoder::RangeDecoder(const std::vector<u8>& bytes) : bytes_(bytes) {
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

u8 RangeDecoder::next_byte() {
    if (pos_ < bytes_.size()) return bytes_[pos_++];
    exhausted_ = true;
    return 0;
}

void RangeDecoder::renorm() {
    for (;;) {
        if ((low_ ^ (low_ + range_ - 1)) < kTop) {
        } else if (range_ < kBot) {
            range_ = kBot - (low_ & (kBot - 1));
        } else {
            return;
        }
        code_ = (code_ << 8) | next_byte();
        low_ <<= 8;
        range_ <<= 8;
    }
}

i64 RangeDecoder::decode_symbol(const CdfTable& t) {
    const u32 r = range_ >> kCdfTotalBits;
    u32 v = (code_ - low_) / r;
    if (v >= kCdfTotal) v = kCdfTotal - 1;  // corrupted stream: stay in-range, never crash
    // binary search: greatest s with cum[s] <= v
    const auto it = std::upper_bound(t.cum.begin(), t.cum.end(), v);
    const i64 s = static_cast<i64>(it - t.cum.begin()) - 1;
    update(t.cum[static_cast<size_t>(s)], t.freq(s));
    return s;
}

void RangeDecoder::update(u32 cum_lo, u32 freq) {
    const u32 r = range_ >> kCdfTotalBits;
    low_ += cum_lo * r;
    range_ = freq * r;
    renorm();
}

u32 RangeDecoder::decode_raw16() {
    static const CdfTable bytes = CdfTable::uniform(256);
    const u32 hi = static_cast<u32>(decode_symbol(bytes));
    const u32 lo = static_cast<u32>(decode_symbol(bytes));
    return (hi << 8) | lo;
}

std::vector<u8> range_encode(const std::vector<i64>& symbols, const std::vector<const CdfTable*>& cdfs) {
    if (symbols.size() != cdfs.size()) throw CodingError("range_encode: one table per symbol required");
    RangeEncoder enc;
    for (size_t i = 0; i < symbols.size(); ++i) enc.encode_symbol(*cdfs[i], symbols[i]);
    return enc.finish();
}

std::vector<i64> range_decode(const std::vector<u8>& stream, const std::vector<const CdfTable*>& cdfs) {
    RangeDecoder dec(stream);
    std::vector<i64> out;
    out.reserve(cdfs.size());
    for (const CdfTable* t : cdfs) out.push_back(dec.decode_symbol(*t));
    if (dec.exhausted()) throw CodingError("range_decode: truncated stream");
    return out;
}

}  // namespace s2c
