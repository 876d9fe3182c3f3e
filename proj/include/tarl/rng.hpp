#pragma once

#include <cstdint>

namespace tarl {

// splitmix64 stream; hand-rolled so artifacts are byte-identical across
// standard libraries and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, n). Multiply-shift; bias is negligible for small n and
    // identical everywhere, which is what reproducibility needs.
    std::uint32_t next_below(std::uint32_t n) {
        return static_cast<std::uint32_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

private:
    std::uint64_t state_;
};

// Derives independent deterministic streams from (seed, tag, index).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t kStreamLearn = 0x4C4541524EULL;
inline constexpr std::uint64_t kStreamSearch = 0x534541524348ULL;
inline constexpr std::uint64_t kStreamEval = 0x4556414CULL;

inline std::uint64_t episode_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    return mix_seed(mix_seed(base, stream), index);
}

}
