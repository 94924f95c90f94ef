#pragma once

// Counter-based RNG (Philox4x32-10) plus the handful of variate
// transforms the simulators need. Streams are keyed by (seed, stream id),
// so replica r of an ensemble draws from stream (base_seed, r) and results
// never depend on scheduling or thread count.

#include <cstdint>
#include <cmath>
#include <array>
#include <stdexcept>

namespace brw {

namespace detail {

struct philox_state {
    std::array<uint32_t, 4> ctr;
    std::array<uint32_t, 2> key;
};

inline void philox_round(std::array<uint32_t, 4>& x, const std::array<uint32_t, 2>& k) {
    constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    uint64_t p0 = static_cast<uint64_t>(M0) * x[0];
    uint64_t p1 = static_cast<uint64_t>(M1) * x[2];
    uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
    uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
    x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
}

inline std::array<uint32_t, 4> philox4x32_10(std::array<uint32_t, 4> ctr,
                                             std::array<uint32_t, 2> key) {
    constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int r = 0; r < 10; ++r) {
        if (r > 0) { key[0] += W0; key[1] += W1; }
        philox_round(ctr, key);
    }
    return ctr;
}

} // namespace detail

// One independent stream of randomness, identified by (seed, stream).
class RngStream {
public:
    RngStream(uint64_t seed, uint64_t stream)
        : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
          stream_(stream), block_(0), pos_(4), has_spare_(false), spare_(0.0) {}

    uint32_t next_u32() {
        if (pos_ >= 4) refill();
        return buf_[pos_++];
    }

    uint64_t next_u64() {
        uint64_t lo = next_u32();
        uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // uniform on [0,1), 53-bit resolution
    double u01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Exponential(rate); rate > 0
    double exponential(double rate) {
        return -std::log1p(-u01()) / rate;
    }

    // standard normal via Box-Muller, one spare cached
    double normal() {
        if (has_spare_) { has_spare_ = false; return spare_; }
        double u1 = u01(), u2 = u01();
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        double th = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(th);
        has_spare_ = true;
        return r * std::cos(th);
    }

    // integer in [0, m)
    uint64_t below(uint64_t m) {
        return static_cast<uint64_t>(u01() * static_cast<double>(m)) % m;
    }

private:
    void refill() {
        std::array<uint32_t, 4> ctr = {
            static_cast<uint32_t>(block_), static_cast<uint32_t>(block_ >> 32),
            static_cast<uint32_t>(stream_), static_cast<uint32_t>(stream_ >> 32)};
        buf_ = detail::philox4x32_10(ctr, key_);
        ++block_;
        pos_ = 0;
    }

    std::array<uint32_t, 2> key_;
    uint64_t stream_;
    uint64_t block_;
    std::array<uint32_t, 4> buf_{};
    int pos_;
    bool has_spare_;
    double spare_;
};

} // namespace brw
