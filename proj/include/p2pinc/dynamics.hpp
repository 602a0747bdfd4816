#pragma once

/**
 * Cournot-style learning for heterogeneous peer populations.
 *
 * Every round, each active peer computes the total benefit S_i it receives
 * from the current profile and replies with the contribution maximizing
 * -d + p(d) S_i. All replies are applied together at the end of the round.
 * Removed peers sit at zero; frozen peers hold a fixed contribution.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "p2pinc/model.hpp"

namespace p2pinc {

struct LearningConfig {
    double alpha = 1.0;
    double tolerance = 1e-6;  ///< threshold on mean |delta d| over updating peers
    std::size_t max_iterations = 10000;

    void validate() const {
        if (!std::isfinite(alpha) || alpha <= 0.0) {
            throw std::invalid_argument("alpha must be positive");
        }
        if (!std::isfinite(tolerance) || tolerance <= 0.0) {
            throw std::invalid_argument("tolerance must be positive");
        }
        if (max_iterations < 1) {
            throw std::invalid_argument("max_iterations must be at least 1");
        }
    }
};

class PeerStatus {
public:
    enum class Kind { active, removed, frozen };

    constexpr PeerStatus() = default;

    static constexpr PeerStatus active() { return {}; }
    static constexpr PeerStatus removed() { return PeerStatus(Kind::removed, 0.0); }
    static PeerStatus frozen(double contribution) {
        detail::require_finite_nonnegative(contribution, "frozen contribution");
        return PeerStatus(Kind::frozen, contribution);
    }

    [[nodiscard]] constexpr Kind kind() const noexcept { return kind_; }
    [[nodiscard]] constexpr bool is_active() const noexcept { return kind_ == Kind::active; }
    [[nodiscard]] constexpr bool is_removed() const noexcept { return kind_ == Kind::removed; }
    [[nodiscard]] constexpr bool is_frozen() const noexcept { return kind_ == Kind::frozen; }
    [[nodiscard]] constexpr double fixed_contribution() const noexcept { return fixed_; }

    friend constexpr bool operator==(const PeerStatus&, const PeerStatus&) = default;

private:
    constexpr PeerStatus(Kind kind, double fixed) : kind_(kind), fixed_(fixed) {}

    Kind kind_ = Kind::active;
    double fixed_ = 0.0;
};

struct TrajectoryRecord {
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> per_iteration_mean;      ///< mean contribution of non-removed peers
    std::vector<double> per_iteration_residual;  ///< mean |delta d| of active peers
    ContributionProfile final_profile;
    double final_residual = std::numeric_limits<double>::infinity();
};

/// A NaN or infinity showed up in the profile.
class NumericalError : public std::runtime_error {
public:
    NumericalError(std::size_t iteration, std::size_t peer)
        : std::runtime_error("non-finite contribution for peer " + std::to_string(peer) + " at iteration " +
                             std::to_string(iteration)),
          iteration_(iteration) {}

    [[nodiscard]] std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

/**
 * argmax over d >= 0 of -d + p(d) S.
 *
 * alpha = 1 has the closed form max(0, sqrt(S) - 1). Otherwise the largest
 * root of S p'(d) = 1 is bracketed and bisected. For alpha > 1 the gradient
 * is negative near 0 and the bracket starts at the peak of p'; for alpha < 1
 * p' is decreasing and the bracket starts near 0. The root is returned only
 * if it beats quitting (u > 0); a failure to bracket also means quitting.
 */
[[nodiscard]] inline double best_response(const ProbabilityCurve& curve, double received) {
    if (!std::isfinite(received) || received < 0.0) {
        throw std::domain_error("received benefit must be finite and non-negative");
    }
    if (received == 0.0) {
        return 0.0;
    }
    const double alpha = curve.alpha();
    if (alpha == 1.0) {
        return std::max(0.0, std::sqrt(received) - 1.0);
    }

    auto gradient = [&](double d) { return utility_gradient_at(curve, received, d); };

    double lo = 0.0;
    if (alpha > 1.0) {
        lo = std::pow((alpha - 1.0) / (alpha + 1.0), 1.0 / alpha);
    } else {
        lo = 1e-300;
    }
    if (!(gradient(lo) > 0.0)) {
        return 0.0;
    }

    double hi = std::max({1.0, received, 2.0 * lo});
    for (int doublings = 0; gradient(hi) >= 0.0; ++doublings) {
        if (doublings > 2000 || !std::isfinite(hi * 2.0)) {
            return 0.0;
        }
        lo = hi;
        hi *= 2.0;
    }

    for (int step = 0; step < 400; ++step) {
        // Geometric midpoints while the bracket spans orders of magnitude.
        const double mid = (hi > 4.0 * lo) ? std::sqrt(lo) * std::sqrt(hi) : lo + 0.5 * (hi - lo);
        if (!(mid > lo && mid < hi)) {
            break;
        }
        if (gradient(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double root = std::abs(gradient(lo)) <= std::abs(gradient(hi)) ? lo : hi;
    return utility_at(curve, received, root) > 0.0 ? root : 0.0;
}

namespace detail {

inline void check_statuses(std::span<const PeerStatus> statuses, std::size_t n) {
    if (!statuses.empty() && statuses.size() != n) {
        throw std::invalid_argument("peer status vector has " + std::to_string(statuses.size()) +
                                    " entries but the system has " + std::to_string(n) + " peers");
    }
}

inline PeerStatus status_of(std::span<const PeerStatus> statuses, std::size_t i) {
    return statuses.empty() ? PeerStatus::active() : statuses[i];
}

}  // namespace detail

/**
 * Runs synchronous best-response rounds from `initial` until the mean
 * absolute change over active peers drops below cfg.tolerance or
 * cfg.max_iterations rounds have been played.
 *
 * An empty `statuses` span means every peer is active.
 */
[[nodiscard]] inline TrajectoryRecord iterate_to_equilibrium(const BenefitMatrix& benefits,
                                                             const ContributionProfile& initial,
                                                             std::span<const PeerStatus> statuses,
                                                             const LearningConfig& cfg) {
    cfg.validate();
    const std::size_t n = benefits.size();
    if (initial.size() != n) {
        throw std::invalid_argument("initial profile has " + std::to_string(initial.size()) +
                                    " entries but the benefit matrix has " + std::to_string(n) + " peers");
    }
    detail::check_statuses(statuses, n);

    const ProbabilityCurve curve(cfg.alpha);
    std::vector<double> current(initial.values().begin(), initial.values().end());
    std::size_t updating = 0;
    std::size_t present = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto status = detail::status_of(statuses, i);
        if (status.is_removed()) {
            current[i] = 0.0;
        } else {
            ++present;
            if (status.is_frozen()) {
                current[i] = status.fixed_contribution();
            } else {
                ++updating;
            }
        }
    }

    TrajectoryRecord record;
    std::vector<double> next(current);
    for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
        double change = 0.0;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto status = detail::status_of(statuses, i);
            if (status.is_active()) {
                next[i] = best_response(curve, received_benefit(benefits, current, i));
                if (!std::isfinite(next[i])) {
                    throw NumericalError(it, i);
                }
                change += std::abs(next[i] - current[i]);
            }
            total += next[i];
        }
        current.swap(next);

        const double residual = updating > 0 ? change / static_cast<double>(updating) : 0.0;
        record.per_iteration_mean.push_back(present > 0 ? total / static_cast<double>(present) : 0.0);
        record.per_iteration_residual.push_back(residual);
        record.iterations = it;
        record.final_residual = residual;
        if (residual < cfg.tolerance) {
            record.converged = true;
            break;
        }
    }
    record.final_profile = ContributionProfile(std::move(current));
    return record;
}

[[nodiscard]] inline TrajectoryRecord iterate_to_equilibrium(const BenefitMatrix& benefits,
                                                             const ContributionProfile& initial,
                                                             const LearningConfig& cfg) {
    return iterate_to_equilibrium(benefits, initial, {}, cfg);
}

/// Mean contribution over peers that have not been removed.
[[nodiscard]] inline double mean_contribution(const ContributionProfile& profile,
                                              std::span<const PeerStatus> statuses = {}) {
    detail::check_statuses(statuses, profile.size());
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        if (!detail::status_of(statuses, i).is_removed()) {
            total += profile[i];
            ++count;
        }
    }
    return count > 0 ? total / static_cast<double>(count) : 0.0;
}

struct NashReport {
    double max_gain = 0.0;
    std::size_t worst_peer = 0;
    bool is_nash = true;
};

/**
 * Largest utility gain any active peer obtains by deviating unilaterally to
 * its best response. Frozen and removed peers are not strategic and are
 * skipped.
 */
[[nodiscard]] inline NashReport verify_nash(const BenefitMatrix& benefits, const ContributionProfile& profile,
                                            const ProbabilityCurve& curve, double tol,
                                            std::span<const PeerStatus> statuses = {}) {
    if (profile.size() != benefits.size()) {
        throw std::invalid_argument("profile length does not match the benefit matrix");
    }
    detail::check_statuses(statuses, profile.size());
    NashReport report;
    bool first = true;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        if (!detail::status_of(statuses, i).is_active()) {
            continue;
        }
        const double received = received_benefit(benefits, profile.values(), i);
        const double reply = best_response(curve, received);
        const double gain = utility_at(curve, received, reply) - utility_at(curve, received, profile[i]);
        if (first || gain > report.max_gain) {
            report.max_gain = std::max(0.0, gain);
            report.worst_peer = i;
            first = false;
        }
    }
    report.is_nash = report.max_gain < tol;
    return report;
}

}  // namespace p2pinc
