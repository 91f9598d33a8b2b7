#pragma once

#include <cstdint>
#include <random>

namespace occugen {

/// Seeded random source. Every stochastic operation in the library draws from
/// one of these; derived streams (derive) keep parallel samplers independent
/// and reproducible.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(engine_);
    }

    int uniform_int(int lo, int hi) { // inclusive bounds
        std::uniform_int_distribution<int> d(lo, hi);
        return d(engine_);
    }

    double normal() {
        std::normal_distribution<double> d(0.0, 1.0);
        return d(engine_);
    }

    float normal_f() { return static_cast<float>(normal()); }

    uint64_t next_u64() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

    /// Deterministically derives an independent stream from a seed and a
    /// stream index (splitmix64 of the pair).
    static uint64_t derive(uint64_t seed, uint64_t stream) {
        uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace occugen
