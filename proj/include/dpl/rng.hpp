#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace dpl {

// SplittableRandom finalizer (Steele/Lea/Flood; Vigna's fixed-increment form).
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-keyed stream: xoshiro256++ whose state is derived from
// (master seed, id0, id1, id2) through a splitmix64 chain.  Every logical
// unit of work (sample index, pool level, chunk) owns its own stream, so
// results do not depend on how work is assigned to threads.
class RngStream {
public:
    using result_type = std::uint64_t;

    explicit RngStream(std::uint64_t seed, std::uint64_t id0 = 0,
                       std::uint64_t id1 = 0, std::uint64_t id2 = 0) {
        std::uint64_t h = seed;
        splitmix64_next(h);
        h ^= 0x6a09e667f3bcc909ULL + id0;
        splitmix64_next(h);
        h ^= 0xbb67ae8584caa73bULL + id1;
        splitmix64_next(h);
        h ^= 0x3c6ef372fe94f82bULL + id2;
        for (auto& w : s_) w = splitmix64_next(h);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<std::uint64_t>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n); n > 0.  Bounded rejection keeps it exact.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t x = (*this)();
            if (x >= threshold) return x % n;
        }
    }

    // Standard normal, Marsaglia polar method.  Second value is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    // Exponential(1); -log1p(-u) avoids log(0).
    double exponential() { return -std::log1p(-uniform01()); }

    bool bernoulli(double p) { return uniform01() < p; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace dpl
