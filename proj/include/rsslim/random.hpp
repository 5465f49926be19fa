#pragma once

#include <cstdint>
#include <random>

namespace rsslim {

/// Seed schema: one 64-bit master seed per run. Sub-stream `index` is an
/// std::mt19937_64 seeded with stream_seed(master, index), where stream_seed
/// mixes both words through SplitMix64. Draws consume standard normals from
/// std::normal_distribution in index order, so results are bit-reproducible
/// for a given standard library and statistically equivalent across others.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

inline std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t index) {
    return std::mt19937_64(stream_seed(master, index));
}

}  // namespace rsslim
