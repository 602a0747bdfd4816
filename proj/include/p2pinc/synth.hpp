#pragma once

/**
 * Seeded generation of heterogeneous peer populations.
 *
 * Each peer i picks m = round(density (N-1)) distinct partners uniformly at
 * random and draws a weight b_ij for each of them. Weights are scaled so the
 * expected row sum equals the target average benefit, i.e. each draw has
 * mean target_b_av / m. Partner sets are drawn per row independently, so the
 * interaction graph is directed.
 *
 * Streams: the benefit matrix and the initial profile draw from separate
 * generators derived from the instance seed, so either can be regenerated
 * on its own.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "p2pinc/format.hpp"
#include "p2pinc/model.hpp"
#include "p2pinc/random.hpp"

namespace p2pinc {

struct BenefitDistribution {
    enum class Kind { gamma, gaussian, constant };

    Kind kind = Kind::gamma;
    double gamma_shape = 2.0;
    double relative_stddev = 0.5;  ///< gaussian only, stddev / mean

    static BenefitDistribution gamma(double shape) { return {Kind::gamma, shape, 0.0}; }
    static BenefitDistribution gaussian(double relative_stddev) { return {Kind::gaussian, 0.0, relative_stddev}; }
    static BenefitDistribution constant() { return {Kind::constant, 0.0, 0.0}; }

    /// One draw with the given mean.
    double sample(Rng& rng, double mean) const {
        switch (kind) {
            case Kind::gamma:
                return rng.gamma(gamma_shape, mean / gamma_shape);
            case Kind::gaussian:
                // Truncated at zero rather than resampled.
                return std::max(0.0, rng.normal(mean, relative_stddev * mean));
            case Kind::constant:
                return mean;
        }
        return mean;
    }
};

[[nodiscard]] inline std::string_view to_string(BenefitDistribution::Kind kind) {
    switch (kind) {
        case BenefitDistribution::Kind::gamma:
            return "gamma";
        case BenefitDistribution::Kind::gaussian:
            return "gaussian";
        case BenefitDistribution::Kind::constant:
            return "constant";
    }
    return "?";
}

struct InstanceSpec {
    std::size_t n = 1000;
    double density = 0.02;
    double target_b_av = 6.0;
    BenefitDistribution benefit_distribution{};
    double initial_mean = 1.0;
    double initial_stddev = 0.25;
    std::uint64_t seed = 1;

    /// round(density (n - 1)); the number of partners in each row.
    [[nodiscard]] std::size_t partners_per_peer() const {
        return static_cast<std::size_t>(std::llround(density * static_cast<double>(n - 1)));
    }

    void validate() const {
        if (n < 2) {
            throw std::invalid_argument("n must be at least 2");
        }
        if (!(density > 0.0 && density <= 1.0)) {
            throw std::invalid_argument("density must lie in (0, 1]");
        }
        if (density * static_cast<double>(n - 1) < 1.0) {
            throw std::invalid_argument("density * (n - 1) must be at least 1 (each peer needs a partner)");
        }
        if (!std::isfinite(target_b_av) || target_b_av <= 0.0) {
            throw std::invalid_argument("target average benefit must be positive");
        }
        const auto& dist = benefit_distribution;
        if (dist.kind == BenefitDistribution::Kind::gamma && !(dist.gamma_shape > 0.0 && std::isfinite(dist.gamma_shape))) {
            throw std::invalid_argument("gamma shape must be positive");
        }
        if (dist.kind == BenefitDistribution::Kind::gaussian &&
            !(dist.relative_stddev >= 0.0 && std::isfinite(dist.relative_stddev))) {
            throw std::invalid_argument("relative stddev must be non-negative");
        }
        if (!std::isfinite(initial_mean) || initial_mean < 0.0) {
            throw std::invalid_argument("initial mean must be non-negative");
        }
        if (!std::isfinite(initial_stddev) || initial_stddev < 0.0) {
            throw std::invalid_argument("initial stddev must be non-negative");
        }
    }
};

/// m distinct values from [0, bound), sorted. Floyd's algorithm.
[[nodiscard]] inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t bound, std::size_t m) {
    if (m > bound) {
        throw std::invalid_argument("cannot draw more distinct values than the range holds");
    }
    std::vector<std::size_t> chosen;
    chosen.reserve(m);
    // Linear membership scans for small draws, a bitmap for large ones.
    const bool use_bitmap = m > 64;
    std::vector<bool> taken(use_bitmap ? bound : 0, false);
    for (std::size_t j = bound - m; j < bound; ++j) {
        const auto t = static_cast<std::size_t>(rng.below(j + 1));
        const bool seen = use_bitmap ? static_cast<bool>(taken[t])
                                     : std::find(chosen.begin(), chosen.end(), t) != chosen.end();
        const std::size_t pick = seen ? j : t;
        chosen.push_back(pick);
        if (use_bitmap) {
            taken[pick] = true;
        }
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

[[nodiscard]] inline BenefitMatrix generate_benefit_matrix(const InstanceSpec& spec) {
    spec.validate();
    const std::size_t m = spec.partners_per_peer();
    const double entry_mean = spec.target_b_av / static_cast<double>(m);
    Rng rng(spec.seed, Stream::benefits);

    std::vector<BenefitMatrix::Triplet> triplets;
    triplets.reserve(spec.n * m);
    for (std::size_t i = 0; i < spec.n; ++i) {
        // Indices in [0, n-1) skip over i itself.
        for (std::size_t k : sample_without_replacement(rng, spec.n - 1, m)) {
            const std::size_t j = k < i ? k : k + 1;
            triplets.push_back({i, j, spec.benefit_distribution.sample(rng, entry_mean)});
        }
    }
    return BenefitMatrix(spec.n, std::move(triplets));
}

/// Normal(initial_mean, initial_stddev) draws clamped below at 0.
[[nodiscard]] inline ContributionProfile generate_initial_profile(const InstanceSpec& spec) {
    spec.validate();
    Rng rng(spec.seed, Stream::initial_profile);
    std::vector<double> values(spec.n);
    for (double& v : values) {
        v = spec.initial_stddev == 0.0 ? spec.initial_mean
                                       : std::max(0.0, rng.normal(spec.initial_mean, spec.initial_stddev));
    }
    return ContributionProfile(std::move(values));
}

/// Peers chosen uniformly at random, `count` of them, from the given stream.
[[nodiscard]] inline std::vector<std::size_t> pick_peers(std::size_t n, std::size_t count, std::uint64_t seed,
                                                         Stream stream) {
    Rng rng(seed, stream);
    return sample_without_replacement(rng, n, count);
}

struct Instance {
    BenefitMatrix benefits;
    ContributionProfile initial;
    double density = 0.0;
    std::uint64_t seed = 0;
};

[[nodiscard]] inline Instance generate_instance(const InstanceSpec& spec) {
    return {generate_benefit_matrix(spec), generate_initial_profile(spec), spec.density, spec.seed};
}

/**
 * Plain-text instance file:
 *
 *     n density seed
 *     i j b_ij        (one line per nonzero entry)
 *     i d0_i          (one line per peer)
 *
 * Reals are written in shortest round-trip form, so reading a written file
 * reproduces the instance exactly.
 */
inline void write_instance(std::ostream& out, const Instance& instance) {
    const auto& b = instance.benefits;
    out << b.size() << ' ' << format_double(instance.density) << ' ' << instance.seed << '\n';
    for (std::size_t i = 0; i < b.size(); ++i) {
        for (const auto& e : b.row(i)) {
            out << i << ' ' << e.peer << ' ' << format_double(e.weight) << '\n';
        }
    }
    for (std::size_t i = 0; i < instance.initial.size(); ++i) {
        out << i << ' ' << format_double(instance.initial[i]) << '\n';
    }
}

[[nodiscard]] inline Instance read_instance(std::istream& in) {
    auto fail = [](std::size_t line_no, const std::string& what) -> Instance {
        throw std::runtime_error("instance file line " + std::to_string(line_no) + ": " + what);
    };
    auto parse_index = [](const std::string& token) {
        std::size_t pos = 0;
        const unsigned long long value = std::stoull(token, &pos);
        if (pos != token.size()) {
            throw std::invalid_argument("bad index");
        }
        return static_cast<std::size_t>(value);
    };

    std::string line;
    std::size_t line_no = 0;
    std::size_t n = 0;
    Instance instance;
    bool have_header = false;
    std::vector<BenefitMatrix::Triplet> triplets;
    std::vector<double> profile;
    std::vector<bool> seen;
    std::size_t peers_seen = 0;

    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::vector<std::string> tokens;
        for (std::string t; fields >> t;) {
            tokens.push_back(t);
        }
        if (tokens.empty()) {
            continue;
        }
        try {
            if (!have_header) {
                if (tokens.size() != 3) {
                    return fail(line_no, "header must be 'n density seed'");
                }
                n = parse_index(tokens[0]);
                instance.density = parse_double(tokens[1]);
                instance.seed = std::stoull(tokens[2]);
                profile.assign(n, 0.0);
                seen.assign(n, false);
                have_header = true;
            } else if (tokens.size() == 3) {
                if (peers_seen > 0) {
                    return fail(line_no, "benefit entry after the contribution section");
                }
                triplets.push_back({parse_index(tokens[0]), parse_index(tokens[1]), parse_double(tokens[2])});
            } else if (tokens.size() == 2) {
                const std::size_t i = parse_index(tokens[0]);
                if (i >= n || seen[i]) {
                    return fail(line_no, "contribution index out of range or repeated");
                }
                profile[i] = parse_double(tokens[1]);
                seen[i] = true;
                ++peers_seen;
            } else {
                return fail(line_no, "expected 2 or 3 fields");
            }
        } catch (const std::logic_error& e) {
            return fail(line_no, e.what());
        }
    }
    if (!have_header) {
        return fail(line_no, "missing header");
    }
    if (peers_seen != n) {
        return fail(line_no, "expected " + std::to_string(n) + " contributions, found " + std::to_string(peers_seen));
    }
    instance.benefits = BenefitMatrix(n, std::move(triplets));
    instance.initial = ContributionProfile(std::move(profile));
    return instance;
}

}  // namespace p2pinc
