#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace mpschur {

// Counter-based 64-bit generator: draw i is a fixed bijective mix of
// (seed, stream, i), so any draw can be reproduced from the seed alone.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), key_(mix(seed ^ mix(stream + 0x6a09e667f3bcc909ULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(*this);
    }
    double normal() { return normal_(*this); }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace mpschur
