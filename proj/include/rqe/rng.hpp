#pragma once

#include "rqe/common.hpp"

#include <cstdint>

namespace rqe {

/**
 * SplitMix64 pseudo-random generator (Steele, Lea & Flood 2014).
 *
 * Chosen over std::mt19937_64 + std::*_distribution because the standard
 * leaves distribution algorithms unspecified; with a fixed generator and
 * hand-rolled transforms every sampled trajectory is bit-reproducible
 * across standard libraries and platforms.
 *
 * Substreams: derive(seed, stream) produces statistically independent
 * streams for (seed, episode) pairs, so seed sweeps and per-episode
 * sampling never share state.
 */
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    /** Finalizer used both for output mixing and substream derivation. */
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    /** Seed for the substream identified by (seed, stream). */
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        return mix(mix(seed + 0x9E3779B97F4A7C15ULL) + stream);
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /** Uniform double in [0, 1) with 53 random bits. */
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /** Uniform double in [lo, hi). */
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /** Standard exponential via inversion (guards against log(0)). */
    double exponential() {
        double u = uniform();
        return -std::log1p(-u);
    }

    /** Index sampled from an unnormalized non-negative weight vector. */
    int categorical(const Vec& weights) {
        double total = weights.sum();
        double u = uniform() * total;
        double acc = 0.0;
        int n = static_cast<int>(weights.size());
        for (int i = 0; i < n; ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return n - 1;  // numerical tail
    }

    /** Symmetric Dirichlet(alpha) draw of dimension n (gamma-ratio method). */
    Vec dirichlet(int n, double alpha = 1.0) {
        Vec g(n);
        for (int i = 0; i < n; ++i) g[i] = gamma_sample(alpha);
        double s = g.sum();
        if (s <= 0.0) return Vec::Constant(n, 1.0 / n);
        return g / s;
    }

private:
    /**
     * Gamma(alpha, 1) sample. alpha = 1 reduces to the exponential; for
     * alpha < 1 uses the boost Gamma(alpha+1) * U^{1/alpha} identity on top
     * of Marsaglia & Tsang (2000) squeeze for alpha >= 1.
     */
    double gamma_sample(double alpha) {
        if (alpha == 1.0) return exponential();
        if (alpha < 1.0) {
            double u = uniform();
            while (u <= 0.0) u = uniform();
            return gamma_sample(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        double d = alpha - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            while (u <= 0.0) u = uniform();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
                return d * v;
            }
        }
    }

    /** Standard normal via Box–Muller (deterministic branch count). */
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    std::uint64_t state_;
};

}  // namespace rqe
