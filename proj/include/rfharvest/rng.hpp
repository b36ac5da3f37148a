#pragma once

#include <cstdint>
#include <random>

namespace rfharvest {

/// Mixes a base seed with stream/index counters into an independent 64-bit
/// seed (splitmix64 finalizer). Trial `i` of stream `s` always gets
/// `derive_seed(seed, s, i)`, so results never depend on execution order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) noexcept;

/// Seeded generator with platform-independent distributions.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The standard distributions are implementation-defined, so the
/// variates below are computed here to keep runs bit-identical everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform on (0, 1), never returns 0.
    double uniform_open();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);
    bool bernoulli(double p) { return uniform() < p; }
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    double exponential(double rate);
    double gamma(double shape, double scale);
    std::uint64_t poisson(double mean);

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

}  // namespace rfharvest
