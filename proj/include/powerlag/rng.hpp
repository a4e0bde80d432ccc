#pragma once

#include <cstdint>

namespace powerlag {

// Derives an independent child seed from (seed, index). Used everywhere a
// replicate, panel, or block needs its own stream: identical (seed, index)
// always yields the identical stream, independent of evaluation order.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

// Small counter-based generator (splitmix64 core). All draws are produced
// via the inverse normal CDF / explicit algorithms rather than std::
// distributions, so output is reproducible across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    double uniform();              // (0,1), never 0 or 1
    double normal();               // standard normal via inverse CDF
    double normal(double mean, double sd) { return mean + sd * normal(); }
    double gamma(double shape, double rate); // Marsaglia–Tsang
    bool bernoulli(double p) { return uniform() < p; }

  private:
    std::uint64_t state_;
};

} // namespace powerlag
