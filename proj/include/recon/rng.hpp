#pragma once

#include <cstdint>
#include <random>

namespace recon {

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard; uniform and normal variates are
// derived here (53-bit mantissa fill, Box-Muller) instead of through the
// implementation-defined std distributions, so streams match across
// toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    double normal();

    // Stable sub-stream derived from this generator's seed and a tag.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t tag);

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace recon
