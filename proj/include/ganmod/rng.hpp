#pragma once

#include <cstdint>
#include <random>

namespace ganmod {

// Deterministic RNG: mt19937_64 bit source with portable uniform/normal conversion
// (no std distributions; their rounding is implementation-defined).
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; values come in deterministic pairs.
    double normal();

    // [0, n)
    int uniform_int(int n) { return static_cast<int>(uniform() * n) % n; }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Stable derived seeds for independent streams (splitmix64 mixing).
uint64_t mix_seed(uint64_t seed, uint64_t stream, uint64_t counter = 0);

} // namespace ganmod
