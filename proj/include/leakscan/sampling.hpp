#pragma once

// Counter-based SplitMix64. Output i of a stream with seed s is
//   mix(s + (i + 1) * 0x9E3779B97F4A7C15)
// where mix is the SplitMix64 finalizer (shift 30/27/31, multipliers
// 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB). This is the same sequence as
// the reference SplitMix64 generator, so samples reproduce in any language.

#include <cstdint>
#include <string_view>
#include <vector>

namespace leakscan {

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class SplitMix64 {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : seed_(seed) {}

    constexpr std::uint64_t next() noexcept { return splitmix64_mix(seed_ + ++counter_ * kGamma); }

    // Uniform in [0, n) by rejection: draws below 2^64 mod n are discarded.
    // n must be positive.
    constexpr std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t reject = (0 - n) % n;
        std::uint64_t x = next();
        while (x < reject) x = next();
        return x % n;
    }

    constexpr std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

// Seed of an independent stream: mix(seed ^ mix(stream + 1)).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64_mix(seed ^ splitmix64_mix(stream + 1));
}

// 64-bit FNV-1a, used to key streams by name.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

// k distinct positions of [0, n) by partial Fisher-Yates: for i < k, swap
// position i with i + below(n - i). Returned in draw order. k <= n.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, SplitMix64& rng);

}  // namespace leakscan
