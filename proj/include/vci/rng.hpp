#pragma once

#include <cmath>
#include <cstdint>

#include "vci/sample.hpp"

namespace vci {

// Counter-based Gaussian stream. Every scalar draw is a pure function of
// (seed, counter), so identical (seed, counter) gives identical sequences
// regardless of what was drawn before, which thread drew it, or in which
// order independent streams run. One counter tick per scalar draw; vectors
// are filled in coordinate order.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t counter = 0)
        : seed_(seed), counter_(counter) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    // Uniform in [0, 1).
    double uniform() {
        std::uint64_t c = counter_++;
        return to_unit(word(seed_, 2 * c));
    }

    // Standard normal via Box-Muller (cosine branch only, keeping the
    // one-tick-per-draw convention exact).
    double gaussian() {
        std::uint64_t c = counter_++;
        double u1 = to_unit_open(word(seed_, 2 * c));      // (0, 1]
        double u2 = to_unit(word(seed_, 2 * c + 1));       // [0, 1)
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    Sample gaussian_sample(std::size_t n) {
        Sample s = Sample::zeros(n);
        for (std::size_t i = 0; i < n; ++i) s.data[i] = gaussian();
        return s;
    }

    Vec gaussian_vec(std::size_t n) {
        Vec v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = gaussian();
        return v;
    }

    // Index into the class-weights simplex; p must sum to ~1.
    std::size_t categorical(const Vec& p) {
        double u = uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < p.size(); ++i) {
            acc += p[i];
            if (u < acc) return i;
        }
        return p.empty() ? 0 : p.size() - 1;
    }

    // Derive a decorrelated child seed, e.g. one per sweep job.
    static std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
        return mix64(master ^ mix64(index + 0x517CC1B727220A95ULL));
    }

private:
    // splitmix64 finalizer.
    static std::uint64_t mix64(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t word(std::uint64_t seed, std::uint64_t idx) {
        return mix64(seed + idx * 0x9E3779B97F4A7C15ULL);
    }

    static double to_unit(std::uint64_t x) {      // [0, 1)
        return static_cast<double>(x >> 11) * 0x1.0p-53;
    }
    static double to_unit_open(std::uint64_t x) { // (0, 1]
        return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
    }

    std::uint64_t seed_;
    std::uint64_t counter_;
};

} // namespace vci
