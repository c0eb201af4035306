#pragma once

#include <cstdint>
#include <random>

#include "plrlab/tensor.hpp"

namespace plr {

/// Seeded generator with a fully specified output stream.
///
/// Bits come from std::mt19937_64, whose sequence is fixed by the standard.
/// Uniform and normal variates are computed here rather than through the
/// <random> distributions, whose algorithms differ between standard
/// libraries, so a seed reproduces the same numbers on every toolchain.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n);
    /// Standard normal variate (Box-Muller, second value cached).
    double normal();
    bool bernoulli(double p) { return uniform() < p; }

    /// Independent generator for a named sub-stream of this seed.
    SeededRng derive(std::uint64_t stream) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

/// scale * N(0, 1) samples of the given shape.
Tensor normal_sample(SeededRng& rng, const Shape& shape, double scale);

}  // namespace plr
