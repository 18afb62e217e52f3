#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace budgetlab {

// splitmix64 finalizer; used to derive well-mixed seeds from small ids.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Deterministic stream derivation: the same (base, ids...) always yields the
// same stream seed, so parallel and serial execution draw identical numbers.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t h = mix64(base);
    for (std::uint64_t id : ids) h = mix64(h ^ mix64(id));
    return h;
}

// Thin RNG wrapper. mt19937_64 output is fully specified by the standard;
// the uniform/normal transforms below are hand-rolled so results do not
// depend on the C++ library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(mix64(seed)) {}

    Rng derive(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        return Rng(derive_seed(seed_, {a, b, c}));
    }

    std::uint64_t bits() { return eng_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(eng_()) * n) >> 64);
    }

    // standard normal via Box-Muller (no caching, so the draw count per call
    // is fixed and streams stay reproducible regardless of call pattern)
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
};

}  // namespace budgetlab
