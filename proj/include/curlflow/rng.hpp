#pragma once

// Counter-based random number generation (Philox4x32-10).  Every path,
// realization, or shell draws from its own stream identified by
// (seed, stream) -- streams are statistically independent and reproducible
// regardless of scheduling, which is what makes threaded Monte Carlo
// bit-reproducible at a fixed configuration.

#include <array>
#include <cmath>
#include <cstdint>

namespace curlflow {

namespace detail {

inline void philox_round(std::array<uint32_t, 4>& ctr, std::array<uint32_t, 2>& key) {
    constexpr uint64_t M0 = 0xD2511F53ull;
    constexpr uint64_t M1 = 0xCD9E8D57ull;
    const uint64_t p0 = M0 * ctr[0];
    const uint64_t p1 = M1 * ctr[2];
    const std::array<uint32_t, 4> out = {
        static_cast<uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
        static_cast<uint32_t>(p1),
        static_cast<uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
        static_cast<uint32_t>(p0),
    };
    ctr = out;
    key[0] += 0x9E3779B9u;  // golden-ratio Weyl increments
    key[1] += 0xBB67AE85u;
}

inline std::array<uint32_t, 4> philox4x32_10(std::array<uint32_t, 4> ctr,
                                             std::array<uint32_t, 2> key) {
    for (int r = 0; r < 10; ++r) philox_round(ctr, key);
    return ctr;
}

// SplitMix64 finalizer; used to decorrelate user-facing stream ids.
inline uint64_t mix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace detail

// Combines substream indices into one 64-bit stream id.
inline uint64_t substream(uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t h = detail::mix64(a);
    h = detail::mix64(h ^ (b + 0x9E3779B97F4A7C15ull));
    h = detail::mix64(h ^ (c + 0xC2B2AE3D27D4EB4Full));
    return h;
}

class RngStream {
public:
    RngStream(uint64_t seed, uint64_t stream)
        : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
          hi_(detail::mix64(stream)) {}

    uint32_t next_u32() {
        if (lane_ == 4) {
            block_ = detail::philox4x32_10(
                {static_cast<uint32_t>(counter_), static_cast<uint32_t>(counter_ >> 32),
                 static_cast<uint32_t>(hi_), static_cast<uint32_t>(hi_ >> 32)},
                key_);
            ++counter_;
            lane_ = 0;
        }
        return block_[lane_++];
    }

    uint64_t next_u64() {
        const uint64_t lo = next_u32();
        const uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform on (0,1); never returns 0 or 1.
    double uniform() {
        return (static_cast<double>(next_u32()) + 0.5) * 0x1p-32;
    }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // UniformRandomBitGenerator interface.
    using result_type = uint32_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return 0xFFFFFFFFu; }
    result_type operator()() { return next_u32(); }

private:
    std::array<uint32_t, 2> key_;
    uint64_t hi_ = 0;
    uint64_t counter_ = 0;
    std::array<uint32_t, 4> block_{};
    int lane_ = 4;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace curlflow
