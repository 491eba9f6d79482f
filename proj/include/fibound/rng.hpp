#pragma once

#include <cstdint>

#include "fibound/special.hpp"

namespace fibound {

namespace detail {

inline constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ull;

// SplitMix64 finalizer: a bijective avalanche mix on 64 bits.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
}

} // namespace detail

// Counter-based draw source. The k-th variate is a pure function of
// (seed, stream_index, k): no shared state, so any worker can reproduce
// any sample's draws, and reusing the same (seed, stream_index) replays
// an identical stream. Replayed streams are what make common random
// numbers across nearby parameter values possible.
class DrawSource {
public:
    DrawSource(std::uint64_t seed, std::uint64_t stream_index)
        : seed_(seed),
          stream_(stream_index),
          key_(detail::mix64(detail::mix64(seed + detail::golden_gamma) +
                             detail::golden_gamma * (stream_index + 1))) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_index() const { return stream_; }

    std::uint64_t next_u64() { return detail::mix64(key_ + detail::golden_gamma * ++counter_); }

    // Uniform strictly inside (0, 1): 53-bit mantissa, centered half-steps,
    // so inverse-CDF transforms never see 0 or 1.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // One uniform per normal keeps the draw count per sample fixed, which
    // keeps streams aligned under common random numbers.
    double next_normal() { return normal_quantile(next_uniform()); }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace fibound
