#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace normscape {

// All randomness in the project flows through this header. Distributions are
// hand-rolled on top of std::mt19937_64 because the standard distributions
// (normal, uniform_int, shuffle) are implementation-defined; the stream below
// is bit-reproducible across compilers and platforms.

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t hash_tag(std::string_view tag) {
    // FNV-1a, then one splitmix round to spread short tags.
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(h);
}

// Derives an independent stream seed from (root seed, tag, index). Used so
// that e.g. weight init, the holdout split and every epoch's shuffle get
// decoupled, stateless streams.
inline uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t index = 0) {
    return splitmix64(root ^ hash_tag(tag) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Unbiased bounded draw (Lemire's method with rejection).
    uint64_t next_below(uint64_t bound) {
        if (bound == 0) return 0;
        while (true) {
            uint64_t x = engine_();
            __uint128_t m = static_cast<__uint128_t>(x) * bound;
            uint64_t lo = static_cast<uint64_t>(m);
            if (lo >= bound || lo >= (-bound) % bound) {
                return static_cast<uint64_t>(m >> 64);
            }
        }
    }

    // Standard normal via Box-Muller; one spare value cached.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 1e-300) u1 = next_double();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // Fisher-Yates permutation of {0, ..., n-1}.
    std::vector<int64_t> permutation(int64_t n) {
        std::vector<int64_t> p(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
        for (int64_t i = n - 1; i > 0; --i) {
            int64_t j = static_cast<int64_t>(next_below(static_cast<uint64_t>(i) + 1));
            std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(j)]);
        }
        return p;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace normscape
