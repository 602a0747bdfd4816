#pragma once

// Closed-form equilibria and local stability of the homogeneous game.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include "p2pinc/model.hpp"

namespace p2pinc::analytic {

/// The two symmetric fixed points of the homogeneous game.
struct EquilibriumPair {
    bool exists = false;
    double d_lo = 0.0;  ///< unstable
    double d_hi = 0.0;  ///< stable
};

struct CriticalBenefit {
    double value;
};

/// Total benefit below which non-participation is the only rational choice: 4 / alpha.
[[nodiscard]] inline CriticalBenefit critical_benefit(double alpha) {
    if (!std::isfinite(alpha) || alpha <= 0.0) {
        throw std::invalid_argument("alpha must be positive");
    }
    return {4.0 / alpha};
}

/// Best reply for alpha = 1: max(0, sqrt(b d_other) - 1). Zero means "quit".
[[nodiscard]] inline double reaction(double b_total, double d_other) {
    detail::require_finite_nonnegative(b_total, "benefit");
    detail::require_finite_nonnegative(d_other, "contribution");
    return std::max(0.0, std::sqrt(b_total * d_other) - 1.0);
}

inline constexpr double kCriticalDiscriminantTolerance = 1e-12;

/**
 * Symmetric equilibria for total benefit b_total (b (N-1) in an N-peer system).
 *
 * With x = d^alpha the stationarity condition is x^2 + (2 - b alpha) x + 1 = 0,
 * so d* = (h -+ sqrt(h^2 - 1))^(1/alpha) with h = b alpha / 2 - 1. Real roots
 * exist iff b alpha >= 4.
 */
[[nodiscard]] inline EquilibriumPair homogeneous_equilibrium(double b_total, double alpha) {
    if (!std::isfinite(b_total) || b_total <= 0.0) {
        throw std::invalid_argument("total benefit must be positive");
    }
    if (!std::isfinite(alpha) || alpha <= 0.0) {
        throw std::invalid_argument("alpha must be positive");
    }
    const double h = b_total * alpha / 2.0 - 1.0;
    double discriminant = h * h - 1.0;
    if (h < 0.0 || discriminant < -kCriticalDiscriminantTolerance) {
        return {};
    }
    discriminant = std::max(0.0, discriminant);
    const double root = std::sqrt(discriminant);
    const double x_hi = h + root;
    // h - root loses precision when h >> 1; the roots multiply to 1.
    const double x_lo = 1.0 / x_hi;
    if (alpha == 1.0) {
        return {true, x_lo, x_hi};
    }
    return {true, std::pow(x_lo, 1.0 / alpha), std::pow(x_hi, 1.0 / alpha)};
}

/**
 * Spectral radius of the linearized alternating best-reply map around
 * (d1*, d2*) for alpha = 1: sqrt((d1+1)(d2+1) / (4 d1 d2)).
 * Below 1 the fixed point attracts, above 1 it repels, at 1 it is neutral.
 */
[[nodiscard]] inline double stability_eigenvalue(double d1_star, double d2_star) {
    if (!std::isfinite(d1_star) || !std::isfinite(d2_star) || d1_star <= 0.0 || d2_star <= 0.0) {
        throw std::domain_error("fixed-point contributions must be positive");
    }
    return std::sqrt((d1_star + 1.0) * (d2_star + 1.0) / (4.0 * d1_star * d2_star));
}

struct FixedPoint {
    double d1;
    double d2;
};

/// Thrown when the alternating iteration fails to settle.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(FixedPoint last, double residual, std::size_t iterations)
        : std::runtime_error("fixed-point iteration did not converge after " + std::to_string(iterations) +
                             " iterations (residual " + std::to_string(residual) + ")"),
          last_(last),
          residual_(residual) {}

    [[nodiscard]] FixedPoint last_iterate() const noexcept { return last_; }
    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    FixedPoint last_;
    double residual_;
};

/**
 * Stable equilibrium of the asymmetric two-peer game (alpha = 1):
 *   d1 = sqrt(b12 d2) - 1,  d2 = sqrt(b21 d1) - 1.
 *
 * Alternates the two reactions starting from d2 = b12 b21, which lies above
 * the unstable root. Returns nullopt if the iteration collapses to zero.
 */
[[nodiscard]] inline std::optional<FixedPoint> two_player_fixed_point(double b12, double b21,
                                                                      std::size_t max_iterations = 100000,
                                                                      double tolerance = 1e-12) {
    if (!std::isfinite(b12) || !std::isfinite(b21) || b12 <= 0.0 || b21 <= 0.0) {
        throw std::invalid_argument("pairwise benefits must be positive");
    }
    FixedPoint p{0.0, b12 * b21};
    double change = 0.0;
    for (std::size_t it = 0; it < max_iterations; ++it) {
        const double d1 = reaction(b12, p.d2);
        const double d2 = reaction(b21, d1);
        change = std::max(std::abs(d1 - p.d1), std::abs(d2 - p.d2));
        p = {d1, d2};
        if (d1 == 0.0 || d2 == 0.0) {
            return std::nullopt;
        }
        if (change < tolerance) {
            return p;
        }
    }
    throw ConvergenceError(p, change, max_iterations);
}

}  // namespace p2pinc::analytic
