#pragma once

#include <cstdint>
#include <string_view>

namespace pbench {

// splitmix64: used to derive independent seed streams from one root seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Domain-separated seed: root seed + purpose tag + index.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t index = 0) {
    return splitmix64(splitmix64(root ^ hash_tag(tag)) + index);
}

// Small deterministic generator (xoshiro-free, just splitmix chain). The
// standard <random> distributions are implementation-defined, so all sampling
// goes through the helpers below to keep outputs stable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x8f1bbcdcULL)) {}

    std::uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) {
        // rejection-free modulo is fine here; n is tiny relative to 2^64
        return next_u64() % n;
    }

    int next_int(int lo, int hi_exclusive) {
        return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi_exclusive - lo)));
    }

    // symmetric uniform in [-s, s], for weight init
    double uniform_sym(double s) { return uniform(-s, s); }

private:
    std::uint64_t state_;
};

}  // namespace pbench
