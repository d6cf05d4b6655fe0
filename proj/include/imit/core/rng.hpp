#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace imit {

// Deterministic RNG with named sub-streams. All randomness in the project
// flows from one 64-bit seed; sub-streams are derived by hashing the stream
// label into the seed so that e.g. dataset generation and weight init draw
// from independent sequences. Distributions are implemented explicitly
// (not via std::*_distribution, whose output is implementation-defined) so
// that fixed-seed runs are bit-stable across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed), seed_(seed) {}

    // Derives an independent stream for `label`. The same (seed, label) pair
    // always yields the same stream regardless of draw history.
    Rng fork(std::string_view label) const {
        return Rng(splitmix(seed_ ^ fnv1a(label)));
    }
    Rng fork(std::string_view label, std::uint64_t index) const {
        return Rng(splitmix(splitmix(seed_ ^ fnv1a(label)) + index));
    }

    std::uint64_t bits() { return gen_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; one value per call, no cached spare.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection-free modulo is fine here: n is tiny relative to 2^64.
        return gen_() % n;
    }

    std::uint64_t seed() const { return seed_; }

  private:
    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (const char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
        return h;
    }
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::mt19937_64 gen_;
    std::uint64_t seed_;
};

}  // namespace imit
