#pragma once

#include <cstdint>

namespace miovs {

/// SplitMix64: the state is a plain counter advanced by a fixed odd gamma,
/// so a stream never revisits a state within 2^64 draws, and identical seeds
/// replay identical sequences bit-exactly. Single-owner by convention; to
/// split work across folds or samples, derive() a child stream instead of
/// sharing one.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : seed_(seed), state_(seed) {}

    void reset(std::uint64_t seed) {
        seed_ = seed;
        state_ = seed;
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        state_ += kGamma;
        return mix(state_);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Lemire multiply-shift; n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Independent child stream keyed by (seed, index); does not advance this
    /// stream. derive(i) == derive(i) for the same parent seed.
    RandomStream derive(std::uint64_t index) const {
        return RandomStream(mix(seed_ ^ (kGamma * (index + 1))));
    }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace miovs
