#pragma once

// Counter-based deterministic RNG. All randomness in the project (pair
// sampling, parameter init, dropout, shuffling) flows through SplitMix64
// streams derived from one user seed, so identical seeds give bit-identical
// runs on any platform.

#include <cstdint>
#include <string_view>
#include <vector>

#include "convrank/common.hpp"

namespace convrank {

class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~0ull; }

    result_type operator()() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Unbiased integer in [0, n). Rejection sampling; deterministic because
    // the underlying stream is.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw ConfigError("SplitMix64::below(0)");
        std::uint64_t limit = (~0ull / n) * n;  // largest multiple of n <= 2^64
        while (true) {
            std::uint64_t x = (*this)();
            if (x < limit) return x % n;
        }
    }

private:
    std::uint64_t state_;
};

// Independent named substream of a seed. Different tags give unrelated streams.
inline std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag) {
    SplitMix64 mix(seed ^ detail::fnv1a(tag));
    return mix();
}

inline std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
    SplitMix64 mix(seed ^ detail::fnv1a(tag) ^ (0x632BE59BD9B4E019ull * (index + 1)));
    return mix();
}

// Fisher-Yates with our own stream; std::shuffle is implementation-defined.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace convrank
