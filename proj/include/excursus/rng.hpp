#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace excursus {

// splitmix64; used to decorrelate per-path substreams from (seed, index) so
// results do not depend on thread count or scheduling.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// One RNG stream. Keeps the normal-pair cache inside the stream object so a
// stream's output is a pure function of (seed, index).
class Rng {
  public:
    Rng() : engine_(0) {}
    Rng(std::uint64_t seed, std::uint64_t index)
        : engine_(mix64(seed ^ mix64(index + 0x51ab5e1fULL))) {}

    // 53-bit mantissa uniform in (0,1); never returns 0 so logs are safe
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) *
               (1.0 / 9007199254740992.0);
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    double exponential(double rate = 1.0) {
        return -std::log(uniform()) / rate;
    }

    std::uint64_t bits() { return engine_(); }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace excursus
