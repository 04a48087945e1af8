#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace adascale {

// splitmix64, used for seeding and for hashing stream tags.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ with Box-Muller normals. Hand-rolled so streams are
// bit-reproducible across standard libraries; std::normal_distribution is
// implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& si : s_) si = splitmix64(sm);
    }

    uint64_t u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        // Rejection sampling keeps the draw unbiased.
        uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = u64();
            if (r >= threshold) return r % n;
        }
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(6.283185307179586477 * u2);
        has_spare_ = true;
        return mag * std::cos(6.283185307179586477 * u2);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Derives an independent stream from a root seed and a tag path. Streams for
// (sample, step) pairs are order-independent, so batched and one-at-a-time
// generation draw identical noise.
inline uint64_t substream(uint64_t root, std::string_view tag, uint64_t a = 0, uint64_t b = 0) {
    uint64_t h = 0xcbf29ce484222325ULL ^ root;
    auto mix = [&h](uint64_t x) {
        h ^= x;
        h *= 0x100000001b3ULL;
        uint64_t st = h;
        h = splitmix64(st);
    };
    for (char ch : tag) mix(static_cast<uint64_t>(static_cast<unsigned char>(ch)));
    mix(a + 0x9e3779b97f4a7c15ULL);
    mix(b + 0x7f4a7c159e3779b9ULL);
    return h;
}

}  // namespace adascale
