#pragma once

/**
 * Dimensionless differential-service incentive model.
 *
 * A peer with contribution d has each of its requests served with
 * probability p(d) = d^a / (1 + d^a). Its utility is
 *
 *     u_i = -d_i + p(d_i) * sum_j b_ij d_j
 *
 * where b_ij is the benefit peer i derives from a unit contribution of
 * peer j, measured in units of i's own per-unit cost.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace p2pinc {

namespace detail {

inline void require_finite_nonnegative(double value, const char* what) {
    if (!std::isfinite(value) || value < 0.0) {
        throw std::domain_error(std::string(what) + " must be finite and non-negative");
    }
}

}  // namespace detail

/// The service differentiator p(d) = d^alpha / (1 + d^alpha).
class ProbabilityCurve {
public:
    explicit ProbabilityCurve(double alpha = 1.0) : alpha_(alpha) {
        if (!std::isfinite(alpha) || alpha <= 0.0) {
            throw std::invalid_argument("probability exponent alpha must be positive and finite");
        }
    }

    [[nodiscard]] double alpha() const noexcept { return alpha_; }

    /// p(d). Saturates just below 1 so that p(d) < 1 holds for every finite d.
    [[nodiscard]] double operator()(double d) const {
        detail::require_finite_nonnegative(d, "contribution");
        if (d == 0.0) {
            return 0.0;
        }
        double p = 0.0;
        if (d <= 1.0) {
            const double x = std::pow(d, alpha_);
            p = x / (1.0 + x);
        } else {
            // d^-alpha avoids overflow of d^alpha for steep curves.
            p = 1.0 / (1.0 + std::pow(d, -alpha_));
        }
        return std::min(p, kBelowOne);
    }

    /// p'(d) = alpha d^(alpha-1) / (1 + d^alpha)^2, for d > 0.
    [[nodiscard]] double derivative(double d) const {
        detail::require_finite_nonnegative(d, "contribution");
        if (d == 0.0) {
            if (alpha_ < 1.0) {
                throw std::domain_error("p'(0) is unbounded for alpha < 1");
            }
            return alpha_ == 1.0 ? 1.0 : 0.0;
        }
        if (d <= 1.0) {
            const double x = std::pow(d, alpha_);
            return alpha_ * std::pow(d, alpha_ - 1.0) / ((1.0 + x) * (1.0 + x));
        }
        const double y = std::pow(d, -alpha_);
        return alpha_ * y / (d * (1.0 + y) * (1.0 + y));
    }

private:
    static constexpr double kBelowOne = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    double alpha_;
};

/// Free-function form of ProbabilityCurve::operator().
[[nodiscard]] inline double probability(const ProbabilityCurve& curve, double d) { return curve(d); }

/**
 * Conversion from physical units to the dimensionless model.
 *
 * d_i = D_i / D0, b_ij = B_ij / c_i and u_i = U_i / (c_i D0).
 */
struct DimensionalParams {
    double unit_contribution = 1.0;  ///< D0, e.g. MB/week
    double cost_per_unit = 1.0;      ///< c_i, currency per unit contributed
    double raw_contribution = 0.0;   ///< D_i, same units as D0
    double raw_benefit = 0.0;        ///< B_ij, currency

    void validate() const {
        if (!(unit_contribution > 0.0) || !std::isfinite(unit_contribution)) {
            throw std::invalid_argument("unit contribution D0 must be positive");
        }
        if (!(cost_per_unit > 0.0) || !std::isfinite(cost_per_unit)) {
            throw std::invalid_argument("cost per unit must be positive");
        }
        detail::require_finite_nonnegative(raw_contribution, "raw contribution");
        detail::require_finite_nonnegative(raw_benefit, "raw benefit");
    }

    [[nodiscard]] double contribution() const {
        validate();
        return raw_contribution / unit_contribution;
    }

    [[nodiscard]] double benefit() const {
        validate();
        return raw_benefit / cost_per_unit;
    }

    [[nodiscard]] double utility(double raw_utility) const {
        validate();
        return raw_utility / (cost_per_unit * unit_contribution);
    }
};

/// A nonzero b_ij entry of one row.
struct BenefitEntry {
    std::size_t peer;
    double weight;
};

/// Sparse N x N benefit matrix in compressed-row form. Immutable once built.
class BenefitMatrix {
public:
    struct Triplet {
        std::size_t row;
        std::size_t col;
        double weight;
    };

    BenefitMatrix() = default;

    /// Builds from (i, j, b_ij) triplets. Duplicates are summed; zero weights are dropped.
    BenefitMatrix(std::size_t n, std::vector<Triplet> triplets) : n_(n), row_start_(n + 1, 0) {
        for (const auto& t : triplets) {
            if (t.row >= n || t.col >= n) {
                throw std::out_of_range("benefit entry index outside matrix");
            }
            if (t.row == t.col) {
                if (t.weight != 0.0) {
                    throw std::invalid_argument("benefit matrix diagonal must be zero");
                }
                continue;
            }
            if (!std::isfinite(t.weight) || t.weight < 0.0) {
                throw std::invalid_argument("benefit weights must be finite and non-negative");
            }
        }
        std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        entries_.reserve(triplets.size());
        std::size_t last_row = 0;
        for (const auto& t : triplets) {
            if (t.weight == 0.0) {
                continue;
            }
            if (!entries_.empty() && last_row == t.row && entries_.back().peer == t.col) {
                entries_.back().weight += t.weight;
                continue;
            }
            entries_.push_back({t.col, t.weight});
            last_row = t.row;
            ++row_start_[t.row + 1];
        }
        for (std::size_t i = 0; i < n_; ++i) {
            row_start_[i + 1] += row_start_[i];
        }
    }

    /// Builds b_ij = B_ij / c_i from raw benefits and per-peer costs.
    static BenefitMatrix from_raw(std::size_t n, const std::vector<Triplet>& raw_benefits,
                                  std::span<const double> costs) {
        if (costs.size() != n) {
            throw std::invalid_argument("one cost per peer is required");
        }
        std::vector<Triplet> scaled;
        scaled.reserve(raw_benefits.size());
        for (const auto& t : raw_benefits) {
            if (t.row >= n) {
                throw std::out_of_range("benefit entry index outside matrix");
            }
            scaled.push_back({t.row, t.col,
                              DimensionalParams{1.0, costs[t.row], 0.0, t.weight}.benefit()});
        }
        return BenefitMatrix(n, std::move(scaled));
    }

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] std::size_t nonzeros() const noexcept { return entries_.size(); }

    [[nodiscard]] std::span<const BenefitEntry> row(std::size_t i) const {
        check_index(i);
        return std::span<const BenefitEntry>(entries_).subspan(row_start_[i],
                                                               row_start_[i + 1] - row_start_[i]);
    }

    [[nodiscard]] std::span<const BenefitEntry> entries() const noexcept { return entries_; }

    [[nodiscard]] double at(std::size_t i, std::size_t j) const {
        check_index(j);
        const auto r = row(i);
        const auto it = std::lower_bound(r.begin(), r.end(), j,
                                         [](const BenefitEntry& e, std::size_t c) { return e.peer < c; });
        return (it != r.end() && it->peer == j) ? it->weight : 0.0;
    }

    /// b_i = sum_j b_ij
    [[nodiscard]] double row_benefit(std::size_t i) const {
        double sum = 0.0;
        for (const auto& e : row(i)) {
            sum += e.weight;
        }
        return sum;
    }

    /// b_av = (1/N) sum_i b_i
    [[nodiscard]] double average_benefit() const {
        if (n_ == 0) {
            return 0.0;
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            sum += row_benefit(i);
        }
        return sum / static_cast<double>(n_);
    }

private:
    void check_index(std::size_t i) const {
        if (i >= n_) {
            throw std::out_of_range("peer index " + std::to_string(i) + " out of range for " +
                                    std::to_string(n_) + " peers");
        }
    }

    std::size_t n_ = 0;
    std::vector<std::size_t> row_start_{0};
    std::vector<BenefitEntry> entries_;
};

/// Vector of dimensionless contributions, all finite and non-negative.
class ContributionProfile {
public:
    ContributionProfile() = default;

    explicit ContributionProfile(std::vector<double> values) : values_(std::move(values)) {
        for (double v : values_) {
            detail::require_finite_nonnegative(v, "contribution");
        }
    }

    ContributionProfile(std::size_t n, double value) : ContributionProfile(std::vector<double>(n, value)) {}
    ContributionProfile(std::initializer_list<double> values) : ContributionProfile(std::vector<double>(values)) {}

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return values_.at(i); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    [[nodiscard]] double mean() const {
        if (values_.empty()) {
            return 0.0;
        }
        double sum = 0.0;
        for (double v : values_) {
            sum += v;
        }
        return sum / static_cast<double>(values_.size());
    }

    friend bool operator==(const ContributionProfile&, const ContributionProfile&) = default;

private:
    std::vector<double> values_;
};

/// S_i = sum_j b_ij d_j, the benefit peer i sees from everybody else.
[[nodiscard]] inline double received_benefit(const BenefitMatrix& benefits,
                                             std::span<const double> contributions, std::size_t i) {
    double sum = 0.0;
    for (const auto& e : benefits.row(i)) {
        sum += e.weight * contributions[e.peer];
    }
    return sum;
}

/// u = -d + p(d) S for a peer seeing total benefit S.
[[nodiscard]] inline double utility_at(const ProbabilityCurve& curve, double received, double d) {
    detail::require_finite_nonnegative(received, "received benefit");
    if (d == 0.0) {
        return 0.0;
    }
    return -d + curve(d) * received;
}

/// du/dd = -1 + S p'(d). Singular at d = 0 when alpha < 1.
[[nodiscard]] inline double utility_gradient_at(const ProbabilityCurve& curve, double received, double d) {
    detail::require_finite_nonnegative(received, "received benefit");
    return -1.0 + received * curve.derivative(d);
}

namespace detail {

inline void check_peer(const BenefitMatrix& benefits, const ContributionProfile& profile, std::size_t i) {
    if (profile.size() != benefits.size()) {
        throw std::invalid_argument("contribution profile has " + std::to_string(profile.size()) +
                                    " entries but the benefit matrix has " +
                                    std::to_string(benefits.size()) + " peers");
    }
    if (i >= benefits.size()) {
        throw std::out_of_range("peer index " + std::to_string(i) + " out of range");
    }
}

}  // namespace detail

[[nodiscard]] inline double utility(const ProbabilityCurve& curve, const BenefitMatrix& benefits,
                                    const ContributionProfile& profile, std::size_t i) {
    detail::check_peer(benefits, profile, i);
    return utility_at(curve, received_benefit(benefits, profile.values(), i), profile[i]);
}

[[nodiscard]] inline double utility_gradient(const ProbabilityCurve& curve, const BenefitMatrix& benefits,
                                             const ContributionProfile& profile, std::size_t i) {
    detail::check_peer(benefits, profile, i);
    return utility_gradient_at(curve, received_benefit(benefits, profile.values(), i), profile[i]);
}

inline constexpr double kParticipationCap = 1000.0;

/// Upload/download ratio times 100, capped at 1000. A peer that has
/// downloaded nothing receives the cap.
[[nodiscard]] inline double participation_level(double uploads_mb, double downloads_mb) {
    detail::require_finite_nonnegative(uploads_mb, "uploads");
    detail::require_finite_nonnegative(downloads_mb, "downloads");
    if (downloads_mb == 0.0) {
        return kParticipationCap;
    }
    return std::min(kParticipationCap, 100.0 * uploads_mb / downloads_mb);
}

/// ceil(p(d) * initial_ttl). A zero contribution yields TTL 0.
[[nodiscard]] inline unsigned scaled_ttl(const ProbabilityCurve& curve, double d, unsigned initial_ttl) {
    if (initial_ttl == 0) {
        throw std::domain_error("initial TTL must be at least 1");
    }
    return static_cast<unsigned>(std::ceil(curve(d) * static_cast<double>(initial_ttl)));
}

}  // namespace p2pinc
