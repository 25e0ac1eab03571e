#ifndef CHUNKNET_RNG_HPP
#define CHUNKNET_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace chunknet {

// FNV-1a, used for stream naming and spec hashing.
inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// A named RNG stream. Streams with different names derived from the same
// root seed are statistically independent, so changing how one consumer
// draws never perturbs another.
class RngStream {
  public:
    RngStream() : RngStream(0, "default") {}
    RngStream(uint64_t root_seed, std::string_view name)
        : engine_(splitmix64(root_seed ^ fnv1a64(name))) {}
    RngStream(uint64_t root_seed, std::string_view name, uint64_t index)
        : engine_(splitmix64(splitmix64(root_seed ^ fnv1a64(name)) + index)) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, n), n > 0.
    uint64_t next_below(uint64_t n) {
        std::uniform_int_distribution<uint64_t> d(0, n - 1);
        return d(engine_);
    }

    // Uniform in [0, 1).
    double next_double() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    }

    bool next_bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return next_double() < p;
    }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace chunknet

#endif  // CHUNKNET_RNG_HPP
