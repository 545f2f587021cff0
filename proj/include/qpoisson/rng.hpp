#pragma once

#include <cstdint>

namespace qpoisson {

/// Purpose tags keep the random streams of different pipeline stages disjoint
/// even when they share a seed.
enum class StreamPurpose : std::uint64_t {
    generic = 0,
    support_graph = 1,
    absorption = 2,
    sa_sweep = 3,
    residual = 4,
    transient_cost = 5,
};

/// Structured stream label: (purpose, state, iteration) names one independent
/// substream of a seeded run.
struct StreamKey {
    StreamPurpose purpose = StreamPurpose::generic;
    std::uint64_t state = 0;
    std::uint64_t iteration = 0;
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

// SplitMix64 finalizer; used as the mixing function for counter-based draws.
inline std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

}  // namespace detail

/// Counter-based random stream. The k-th draw is a pure function of
/// (seed, key, k), so sweeps over states can run in any order, or in
/// parallel, and still reproduce bitwise.
class SamplerState {
public:
    SamplerState(std::uint64_t seed, StreamKey key) : seed_(seed), key_(key) {
        std::uint64_t h = detail::mix64(seed + detail::kGolden);
        h = detail::mix64(h ^ (static_cast<std::uint64_t>(key.purpose) + detail::kGolden));
        h = detail::mix64(h ^ (key.state + detail::kGolden));
        h = detail::mix64(h ^ (key.iteration + detail::kGolden));
        base_ = h;
    }

    std::uint64_t seed() const { return seed_; }
    const StreamKey& key() const { return key_; }

    std::uint64_t next_u64() { return detail::mix64(base_ + (counter_++) * detail::kGolden); }

    /// Uniform double in [0, 1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t seed_ = 0;
    StreamKey key_;
    std::uint64_t base_ = 0;
    std::uint64_t counter_ = 0;
};

/// Child seed derivation, e.g. one seed per benchmark run.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return detail::mix64(detail::mix64(seed + detail::kGolden) ^ (salt + detail::kGolden));
}

}  // namespace qpoisson
