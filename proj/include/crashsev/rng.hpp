#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace crashsev {

// Deterministic 64-bit PRNG (splitmix64). Self-contained so the same seed
// produces the same stream on every platform; std::uniform_*_distribution
// is implementation-defined and would break byte-identical reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        // multiply-shift reduction; bias is negligible for n << 2^64 and the
        // result stays fully deterministic
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Derives an independent sub-seed for a named subsystem from a master seed.
// All randomness in the pipeline flows from one user seed through this.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
    Rng r(master ^ fnv1a64(tag));
    return r.next_u64();
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) {
    Rng r(master ^ fnv1a64(tag) ^ (0x9E3779B97F4A7C15ULL * (index + 1)));
    return r.next_u64();
}

}  // namespace crashsev
