#pragma once

#include <cstdint>

namespace moddrop {

// Counter-based generator: output i is splitmix64(seed + i * golden).
// The whole state is (seed, counter), so streams are reproducible on every
// platform and cheap to split per worker or per sample.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

    std::uint64_t next_u64();
    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);
    // Standard normal via Box-Muller; consumes two draws per call.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    bool bernoulli(double p) { return uniform() < p; }

    // Independent child stream keyed by (this seed, key). Does not advance this stream.
    Rng split(std::uint64_t key) const;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    friend bool operator==(const Rng&, const Rng&) = default;

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Derives a seed from a parent seed and a sequence of keys (e.g. run seed, epoch, sample).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace moddrop
