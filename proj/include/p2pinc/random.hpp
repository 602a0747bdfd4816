#pragma once

/**
 * Seeded random streams with a fully specified draw sequence.
 *
 * The engine is std::mt19937_64, whose output is fixed by the standard.
 * The distributions are implemented here rather than taken from <random>
 * because the library's distribution algorithms differ between standard
 * library implementations:
 *   - uniform reals use the top 53 bits of one engine output,
 *   - bounded integers use rejection on the top bits (unbiased),
 *   - normals use the Marsaglia polar method (pairs cached),
 *   - gammas use Marsaglia-Tsang squeeze/rejection for shape >= 1 and
 *     the U^(1/k) boost for shape < 1.
 */

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace p2pinc {

/// SplitMix64 finalizer; used to derive independent stream seeds.
[[nodiscard]] constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Purpose tags for the independent streams derived from an instance seed.
enum class Stream : std::uint64_t {
    benefits = 1,
    initial_profile = 2,
    removal = 3,
    freezing = 4,
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    Rng(std::uint64_t seed, Stream stream)
        : engine_(mix_seed(seed ^ mix_seed(static_cast<std::uint64_t>(stream)))) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) {
            throw std::invalid_argument("empty range");
        }
        if (bound == 1) {
            return 0;
        }
        const int bits = 64 - std::countl_zero(bound - 1);
        for (;;) {
            const std::uint64_t candidate = engine_() >> (64 - bits);
            if (candidate < bound) {
                return candidate;
            }
        }
    }

    double normal(double mean, double stddev) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u = 0.0;
        double v = 0.0;
        double s = 0.0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * factor;
        has_spare_ = true;
        return mean + stddev * u * factor;
    }

    /// Gamma(shape, scale); mean shape * scale.
    double gamma(double shape, double scale) {
        if (!(shape > 0.0) || !(scale > 0.0)) {
            throw std::invalid_argument("gamma shape and scale must be positive");
        }
        if (shape < 1.0) {
            const double boost = std::pow(open_uniform(), 1.0 / shape);
            return gamma(shape + 1.0, scale) * boost;
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = 0.0;
            double v = 0.0;
            do {
                x = normal(0.0, 1.0);
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = open_uniform();
            if (u < 1.0 - 0.0331 * (x * x) * (x * x)) {
                return scale * d * v;
            }
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
                return scale * d * v;
            }
        }
    }

private:
    /// Uniform in (0, 1).
    double open_uniform() {
        double u = 0.0;
        do {
            u = uniform();
        } while (u == 0.0);
        return u;
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace p2pinc
