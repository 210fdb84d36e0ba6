#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>

namespace menas {

// SplitMix64 step. Used for seeding and for deriving independent streams.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Mixes a base seed with a stream tag and index. Parallel workers draw from
/// streams derived this way, so results do not depend on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index = 0) {
    std::uint64_t s = base + 0x632be59bd9b4e019ull * (tag + 1);
    std::uint64_t r = splitmix64_next(s);
    s += 0x9e3779b97f4a7c15ull * (index + 1);
    r ^= splitmix64_next(s);
    return r;
}

/// xoshiro256++ generator with a Marsaglia-polar Gaussian sampler.
/// Self-contained so that streams are bit-identical across standard
/// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = splitmix64_next(s);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 bits of precision.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Unbiased integer in [0, bound).
    int uniform_int(int bound) {
        const std::uint64_t b = static_cast<std::uint64_t>(bound);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % b;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return static_cast<int>(r % b);
    }

    /// Standard normal draw (polar method; the paired draw is cached).
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        for (;;) {
            const double u = 2.0 * uniform() - 1.0;
            const double v = 2.0 * uniform() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) {
                const double m = std::sqrt(-2.0 * std::log(s) / s);
                spare_ = v * m;
                has_spare_ = true;
                return u * m;
            }
        }
    }

    void fill_gaussian(std::span<double> out) {
        for (double& x : out) x = gaussian();
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace menas
