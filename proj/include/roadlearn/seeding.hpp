#pragma once

#include <cstdint>
#include <random>

namespace roadlearn {

// SplitMix64 finaliser. Feeding it (master, stream, index) gives independent
// child seeds, so adding trials or vehicles never shifts earlier streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
    return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

// Stream tags used by the harness.
enum class Stream : std::uint64_t {
    road = 1,
    fleet = 2,
    model = 3,
    noise = 4,
    obfuscator = 5,
    token = 6,
    alternative = 7,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream s, std::uint64_t index = 0) {
    return derive_seed(master, static_cast<std::uint64_t>(s), index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace roadlearn
