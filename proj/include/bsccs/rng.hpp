#pragma once

#include <cmath>
#include <cstdint>

#include "common.hpp"

namespace bsccs {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace detail

/// xoshiro256** seeded through splitmix64.  Hand-rolled generator and
/// variate transforms so that seeded runs reproduce bit-for-bit across
/// compilers and standard libraries; std::* distributions do not promise
/// that.  `stream` selects a decorrelated substream of the same seed, used
/// to give each simulated subject or bootstrap replicate its own generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t a = seed;
        std::uint64_t b = ~stream;
        for (auto& word : state_) {
            word = detail::splitmix64(a) ^ detail::splitmix64(b);
        }
        // all-zero state is the one forbidden fixed point
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) {
            state_[0] = 0x9E3779B97F4A7C15ull;
        }
    }

    std::uint64_t next() {
        const std::uint64_t result = detail::rotl64(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl64(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1]; safe to pass to log().
    double uniform_pos() {
        return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer on [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) {
            throw internal_error("Rng::below requires n > 0");
        }
        std::uint64_t x, r;
        do {
            x = next();
            r = x % n;
        } while (x - r > static_cast<std::uint64_t>(0) - n);
        return r;
    }

    /// Uniform integer on [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        if (hi < lo) {
            throw internal_error("Rng::uniform_int requires lo <= hi");
        }
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi) - lo + 1));
    }

    double normal(double mean, double sd) {
        // Box-Muller; the second variate is discarded to keep the
        // generator stateless between calls.
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sd * r * std::cos(6.283185307179586 * u2);
    }

    /// Poisson count by uniform products.  Large means are split into
    /// exact Poisson(30) increments first, so no normal approximation is
    /// involved at any mean.
    int poisson(double mean) {
        if (!(mean >= 0.0)) {
            throw internal_error("Rng::poisson requires mean >= 0");
        }
        int n = 0;
        while (mean > 30.0) {
            n += poisson_small(30.0);
            mean -= 30.0;
        }
        return n + poisson_small(mean);
    }

private:
    int poisson_small(double mean) {
        const double limit = std::exp(-mean);
        double prod = uniform_pos();
        int k = 0;
        while (prod > limit) {
            prod *= uniform_pos();
            ++k;
        }
        return k;
    }

    std::uint64_t state_[4];
};

} // namespace bsccs
