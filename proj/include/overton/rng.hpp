#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace overton::rng {

// SplitMix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Engine for substream `index` of a master seed. Results depend only on
/// (master, index), never on which worker draws them.
inline std::mt19937_64 substream(std::uint64_t master, std::uint64_t index) {
    return std::mt19937_64(mix(mix(master) ^ mix(index + 0x632BE59BD9B4E019ULL)));
}

/// Uniform integer in [0, bound). The std distributions are
/// implementation-defined, so draws are mapped by hand (Lemire's method).
inline std::uint64_t below(std::mt19937_64& eng, std::uint64_t bound) {
    if (bound <= 1) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>(eng()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(eng()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

/// Uniform real in [0, 1) with 53 random bits.
inline double unit(std::mt19937_64& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

template <typename T>
void shuffle(std::mt19937_64& eng, std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(below(eng, i));
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace overton::rng
