#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace qnet {

// Deterministic, platform-independent random streams. Each stream is keyed
// by (seed, stream id) so concurrent consumers draw independent sequences
// that are reproducible regardless of scheduling.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class RngStream {
  public:
    RngStream(uint64_t seed, uint64_t stream_id) {
        uint64_t sm = seed ^ (0x6a09e667f3bcc909ULL + stream_id * 0x9e3779b97f4a7c15ULL);
        for (auto& word : s_) word = splitmix64(sm);
    }

    // xoshiro256** core
    uint64_t next() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next() % static_cast<uint64_t>(hi - lo + 1));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Number of Bernoulli(p) attempts up to and including the first success.
    uint64_t geometric_attempts(double p) {
        if (p <= 0.0 || p > 1.0) throw std::invalid_argument("geometric_attempts: p out of range");
        if (p == 1.0) return 1;
        const double u = uniform();
        const double k = std::ceil(std::log1p(-u) / std::log1p(-p));
        return k < 1.0 ? 1 : static_cast<uint64_t>(k);
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

}  // namespace qnet
