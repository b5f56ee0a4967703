/// @file rng.hpp
/// @brief Counter-based random numbers: value k of stream s is a pure
/// function of (seed, stream, k), so results do not depend on call order
/// across streams.
#pragma once

#include <cmath>
#include <cstdint>

namespace mdhw {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

    /// Uniform in [0, 1).
    double uniform() { return (next_u64() >> 11) * (1.0 / 9007199254740992.0); }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Standard normal via Box-Muller (one value per two draws).
    double normal() {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace mdhw
