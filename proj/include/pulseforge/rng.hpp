#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace pulseforge {

// Deterministic random stream. The generator is a splitmix64 core so that
// sequences are bit-identical across platforms and standard-library
// versions (std::normal_distribution is implementation-defined, so the
// normal variates are drawn with an explicit Box-Muller transform).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return std::ldexp(static_cast<double>(next_u64() >> 11), -53); }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // Independent child stream; advancing the child does not affect the parent.
    Rng split() { return Rng(next_u64() ^ 0xa02bdbf7bb3c0a7ULL); }

    // Fisher-Yates shuffle order for [0, n)
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = next_u64() % i;
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

private:
    std::uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace pulseforge
