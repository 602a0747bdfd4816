#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "p2pinc/model.hpp"

using namespace p2pinc;

namespace {

BenefitMatrix single_source(double received) {
    // Peer 0 sees `received` from peer 1 contributing 1.
    return BenefitMatrix(2, {{0, 1, received}, {1, 0, 1.0}});
}

}  // namespace

TEST(Probability, ZeroContributionIsNeverServed) {
    for (double alpha : {0.5, 1.0, 4.0, 10.0}) {
        EXPECT_EQ(probability(ProbabilityCurve(alpha), 0.0), 0.0);
    }
}

TEST(Probability, UnitContributionIsAFairCoin) {
    for (double alpha : {0.1, 0.5, 1.0, 4.0, 10.0, 37.0}) {
        EXPECT_DOUBLE_EQ(probability(ProbabilityCurve(alpha), 1.0), 0.5);
    }
}

TEST(Probability, SteepCurveAtTwo) {
    EXPECT_NEAR(probability(ProbabilityCurve(10.0), 2.0), 1024.0 / 1025.0, 1e-15);
}

TEST(Probability, RejectsBadInputs) {
    const ProbabilityCurve curve(1.0);
    EXPECT_THROW((void)curve(-1.0), std::domain_error);
    EXPECT_THROW((void)curve(std::nan("")), std::domain_error);
    EXPECT_THROW((void)curve(INFINITY), std::domain_error);
    EXPECT_THROW(ProbabilityCurve(0.0), std::invalid_argument);
    EXPECT_THROW(ProbabilityCurve(-2.0), std::invalid_argument);
}

TEST(Probability, StrictlyIncreasingAndBelowOne) {
    for (double alpha : {0.5, 1.0, 2.0, 4.0, 10.0}) {
        const ProbabilityCurve curve(alpha);
        double previous = curve(0.0);
        for (double d = 0.01; d < 5.0; d += 0.01) {
            const double p = curve(d);
            EXPECT_GT(p, previous) << "alpha=" << alpha << " d=" << d;
            previous = p;
        }
        for (double d : {1e3, 1e6, 1e12, 1e300}) {
            EXPECT_LT(curve(d), 1.0);
        }
    }
    EXPECT_GT(ProbabilityCurve(1.0)(1e6), 1.0 - 10.0 * 1.0 * 1e-6);
}

TEST(Utility, ZeroContributionGivesZero) {
    const BenefitMatrix b(3, {{0, 1, 2.0}, {0, 2, 5.0}, {1, 0, 1.0}});
    const ContributionProfile d({0.0, 3.0, 7.0});
    EXPECT_EQ(utility(ProbabilityCurve(1.0), b, d, 0), 0.0);
    EXPECT_EQ(utility(ProbabilityCurve(3.0), b, d, 0), 0.0);
}

TEST(Utility, AllZeroProfile) {
    const BenefitMatrix b(3, {{0, 1, 2.0}, {1, 2, 5.0}, {2, 0, 1.0}});
    const ContributionProfile d(3, 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(utility(ProbabilityCurve(1.0), b, d, i), 0.0);
    }
}

TEST(Utility, KnownValueAtBestResponse) {
    // S = 9, d = 2: -2 + (2/3) 9 = 4 = (sqrt(S) - 1)^2.
    const auto b = single_source(9.0);
    const ContributionProfile d({2.0, 1.0});
    EXPECT_NEAR(utility(ProbabilityCurve(1.0), b, d, 0), 4.0, 1e-12);

    const double grid_best = oracle::grid_argmax([](double x) { return oracle::u(1.0, 9.0, x); }, 0.0, 20.0, 200000);
    EXPECT_NEAR(grid_best, 2.0, 1e-3);
    EXPECT_NEAR(oracle::u(1.0, 9.0, grid_best), 4.0, 1e-6);
}

TEST(Utility, DivergesToMinusInfinity) {
    const auto b = single_source(50.0);
    const ContributionProfile d({1e9, 1.0});
    EXPECT_LT(utility(ProbabilityCurve(1.0), b, d, 0), 0.0);
}

TEST(Utility, RejectsMismatchedInputs) {
    const auto b = single_source(1.0);
    EXPECT_THROW((void)utility(ProbabilityCurve(1.0), b, ContributionProfile(3, 1.0), 0), std::invalid_argument);
    EXPECT_THROW((void)utility(ProbabilityCurve(1.0), b, ContributionProfile(2, 1.0), 2), std::out_of_range);
}

TEST(UtilityGradient, StationaryAtClosedFormBestResponse) {
    const auto b = single_source(9.0);
    EXPECT_NEAR(utility_gradient(ProbabilityCurve(1.0), b, ContributionProfile({2.0, 1.0}), 0), 0.0, 1e-15);
}

TEST(UtilityGradient, NoBenefitMeansPureCost) {
    const BenefitMatrix b(2, {});
    for (double d : {0.1, 1.0, 42.0}) {
        EXPECT_DOUBLE_EQ(utility_gradient(ProbabilityCurve(1.0), b, ContributionProfile({d, 3.0}), 0), -1.0);
    }
}

TEST(UtilityGradient, SingularAtZeroForShallowCurves) {
    const auto b = single_source(4.0);
    EXPECT_THROW((void)utility_gradient(ProbabilityCurve(0.5), b, ContributionProfile({0.0, 1.0}), 0),
                 std::domain_error);
}

TEST(UtilityGradient, MatchesCentralDifferences) {
    std::mt19937_64 gen(20240611);
    std::uniform_real_distribution<double> alpha_dist(0.3, 10.0);
    std::uniform_real_distribution<double> s_dist(0.0, 60.0);
    std::uniform_real_distribution<double> d_dist(0.1, 50.0);
    for (int k = 0; k < 100; ++k) {
        const double alpha = alpha_dist(gen);
        const double s = s_dist(gen);
        const double d = d_dist(gen);
        const ProbabilityCurve curve(alpha);
        const double h = 1e-5 * d;
        const double fd = oracle::central_difference([&](double x) { return oracle::u(alpha, s, x); }, d, h);
        const double analytic = utility_gradient_at(curve, s, d);
        EXPECT_NEAR(analytic, fd, 1e-6 * std::max(1.0, std::abs(fd)))
            << "alpha=" << alpha << " S=" << s << " d=" << d;
    }
}

TEST(Dimensionless, ConversionFormulas) {
    const DimensionalParams p{20.0, 0.5, 60.0, 3.0};
    EXPECT_DOUBLE_EQ(p.contribution(), 3.0);
    EXPECT_DOUBLE_EQ(p.benefit(), 6.0);
    EXPECT_DOUBLE_EQ(p.utility(10.0), 1.0);
    EXPECT_THROW((void)DimensionalParams({0.0, 1.0, 1.0, 1.0}).contribution(), std::invalid_argument);
    EXPECT_THROW((void)DimensionalParams({1.0, -1.0, 1.0, 1.0}).benefit(), std::invalid_argument);
}

TEST(Dimensionless, CommonScalingOfBenefitsAndCostsCancels) {
    const std::vector<BenefitMatrix::Triplet> raw{{0, 1, 3.0}, {0, 2, 0.7}, {1, 2, 1.1}, {2, 0, 5.3}};
    const std::vector<double> costs{0.3, 1.7, 0.9};
    const ContributionProfile d({1.2, 0.4, 2.5});
    const auto base = BenefitMatrix::from_raw(3, raw, costs);

    auto scaled_utilities = [&](double factor) {
        std::vector<BenefitMatrix::Triplet> r = raw;
        for (auto& t : r) {
            t.weight *= factor;
        }
        std::vector<double> c = costs;
        for (auto& x : c) {
            x *= factor;
        }
        const auto m = BenefitMatrix::from_raw(3, r, c);
        std::vector<double> u;
        for (std::size_t i = 0; i < 3; ++i) {
            u.push_back(utility(ProbabilityCurve(1.5), m, d, i));
        }
        return u;
    };
    const auto reference = scaled_utilities(1.0);
    // Power-of-two factors are exact in binary floating point.
    for (double factor : {2.0, 0.25, 1024.0}) {
        EXPECT_EQ(scaled_utilities(factor), reference);
    }
    // Other factors perturb each ratio by an ulp; the utility inherits that
    // error on the scale of its terms, not of their (possibly small) sum.
    for (double factor : {3.0, 0.1, 7.77}) {
        const auto u = scaled_utilities(factor);
        for (std::size_t i = 0; i < 3; ++i) {
            const double scale = d[i] + base.row_benefit(i) * 2.5;
            EXPECT_NEAR(u[i], reference[i], 4e-16 * scale);
        }
    }
    EXPECT_DOUBLE_EQ(base.at(0, 1), 10.0);
}

TEST(BenefitMatrix, RowSumsAndAverage) {
    const BenefitMatrix b(3, {{0, 1, 2.0}, {0, 2, 4.0}, {1, 0, 3.0}, {2, 1, 0.0}});
    EXPECT_EQ(b.nonzeros(), 3u);
    EXPECT_DOUBLE_EQ(b.row_benefit(0), 6.0);
    EXPECT_DOUBLE_EQ(b.row_benefit(1), 3.0);
    EXPECT_DOUBLE_EQ(b.row_benefit(2), 0.0);
    EXPECT_DOUBLE_EQ(b.average_benefit(), 3.0);
    EXPECT_DOUBLE_EQ(b.at(0, 2), 4.0);
    EXPECT_DOUBLE_EQ(b.at(2, 0), 0.0);
}

TEST(BenefitMatrix, RejectsInvalidEntries) {
    EXPECT_THROW(BenefitMatrix(2, {{0, 0, 1.0}}), std::invalid_argument);
    EXPECT_THROW(BenefitMatrix(2, {{0, 1, -1.0}}), std::invalid_argument);
    EXPECT_THROW(BenefitMatrix(2, {{0, 2, 1.0}}), std::out_of_range);
    EXPECT_NO_THROW(BenefitMatrix(2, {{1, 1, 0.0}}));
}

TEST(ContributionProfile, RejectsNegativeAndNonFinite) {
    EXPECT_THROW(ContributionProfile({1.0, -0.1}), std::domain_error);
    EXPECT_THROW(ContributionProfile({std::nan("")}), std::domain_error);
}

TEST(ParticipationLevel, Formula) {
    EXPECT_DOUBLE_EQ(participation_level(500.0, 100.0), 500.0);
    EXPECT_DOUBLE_EQ(participation_level(2000.0, 100.0), 1000.0);
    EXPECT_DOUBLE_EQ(participation_level(0.0, 50.0), 0.0);
    EXPECT_DOUBLE_EQ(participation_level(10.0, 0.0), 1000.0);
    EXPECT_DOUBLE_EQ(participation_level(0.0, 0.0), 1000.0);
    EXPECT_THROW((void)participation_level(-1.0, 5.0), std::domain_error);
    EXPECT_THROW((void)participation_level(1.0, -5.0), std::domain_error);
}

TEST(ScaledTtl, Formula) {
    EXPECT_EQ(scaled_ttl(ProbabilityCurve(1.0), 1.0, 7), 4u);
    for (double alpha : {0.5, 1.0, 10.0}) {
        EXPECT_EQ(scaled_ttl(ProbabilityCurve(alpha), 0.0, 7), 0u);
    }
    EXPECT_EQ(scaled_ttl(ProbabilityCurve(1.0), 1000.0, 7), 7u);
    EXPECT_EQ(scaled_ttl(ProbabilityCurve(10.0), 1e9, 7), 7u);
    EXPECT_THROW((void)scaled_ttl(ProbabilityCurve(1.0), 1.0, 0), std::domain_error);
}
