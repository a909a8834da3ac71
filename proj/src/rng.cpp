#include "moddrop/rng.hpp"

#include <cmath>
#include <numbers>

namespace moddrop {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = splitmix64(seed ^ 0x6A09E667F3BCC908ULL);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ (b + 0x3C6EF372FE94F82BULL));
    h = splitmix64(h ^ (c + 0xA54FF53A5F1D36F1ULL));
    return h;
}

std::uint64_t Rng::next_u64() {
    return splitmix64(seed_ + kGolden * (counter_++) + 0x1F83D9ABFB41BD6BULL);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection keeps the draw exactly uniform.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return x % n;
}

double Rng::normal() {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) {
        u1 = 0x1.0p-53;
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(std::uint64_t key) const {
    return Rng(derive_seed(seed_, key), 0);
}

}  // namespace moddrop
