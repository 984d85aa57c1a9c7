#pragma once

#include <cstdint>
#include <random>

namespace mrf {

/// Seeded generator with platform-independent draws.
///
/// std::mt19937_64 is bit-exact across standard libraries, but the std
/// distributions are not, so uniform and normal variates are derived from the
/// raw engine output here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Standard normal via Box-Muller.
    double normal();
    double normal(double mean, double sigma) { return mean + sigma * normal(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Mixes a base seed with a stream index to get an independent seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

} // namespace mrf
