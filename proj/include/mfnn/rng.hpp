#pragma once

#include <cstdint>
#include <span>

namespace mfnn {

// SplitMix64 (Steele, Lea, Flood 2014). The i-th output of a stream seeded
// with s depends only on (s, i), so a stream can be split across threads by
// jumping to an index.
class SplitMix64 {
public:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

    explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Output number `index` of the stream seeded with `seed`.
    static constexpr std::uint64_t at(std::uint64_t seed, std::uint64_t index) noexcept {
        return mix(seed + (index + 1) * kGamma);
    }

    std::uint64_t next() noexcept {
        state_ += kGamma;
        return mix(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return to_unit(next()); }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound) by rejection, bound > 0.
    std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % bound;
        std::uint64_t x;
        do {
            x = next();
        } while (x >= limit);
        return x % bound;
    }

    static constexpr double to_unit(std::uint64_t x) noexcept {
        return static_cast<double>(x >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

/// Fisher-Yates shuffle driven by SplitMix64 (platform independent).
template <typename T>
void shuffle(std::span<T> items, SplitMix64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

/// Campaign phases that own an independent random stream.
enum class SeedPhase : std::uint64_t {
    Nn1Init = 1,
    Nn1Shuffle = 2,
    Nn2Init = 3,
    Nn2Shuffle = 4,
    McDraws = 5,
    Pilot = 6,
    Calibration = 7,
};

/// Sub-seed for (master, phase, repetition); distinct inputs give unrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t master, SeedPhase phase,
                                    std::uint64_t repetition = 0) noexcept {
    std::uint64_t z = SplitMix64::mix(master ^ 0x6a09e667f3bcc909ULL);
    z = SplitMix64::mix(z + static_cast<std::uint64_t>(phase) * SplitMix64::kGamma);
    return SplitMix64::mix(z + (repetition + 1) * 0xd1b54a32d192ed03ULL);
}

}  // namespace mfnn
