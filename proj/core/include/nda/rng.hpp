#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace nda {

// Counter-based generator: every output is a pure function of (key, counter),
// so the draw for element i never depends on evaluation order. The key is a
// chained splitmix64 digest of (seed, image id hash, timestep, draw index).

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::string_view stream_id, std::uint64_t timestep,
               std::uint64_t draw_index) {
        std::uint64_t k = splitmix64(seed);
        k = splitmix64(k ^ fnv1a64(stream_id));
        k = splitmix64(k ^ timestep);
        k = splitmix64(k ^ (draw_index + 0x51ED2701FFB3A2C9ull));
        key_ = k;
    }

    std::uint64_t bits(std::uint64_t counter) const {
        return splitmix64(key_ ^ (counter * 0xD1B54A32D192ED03ull));
    }

    // Uniform in (0, 1]: top 53 bits, shifted off zero so log() stays finite.
    double uniform(std::uint64_t counter) const {
        return (static_cast<double>(bits(counter) >> 11) + 1.0) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; element i consumes counters 2i, 2i+1.
    double normal(std::uint64_t index) const {
        const double u1 = uniform(2 * index);
        const double u2 = uniform(2 * index + 1);
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::uint64_t key_;
};

} // namespace nda
