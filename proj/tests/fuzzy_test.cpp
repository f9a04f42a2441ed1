#include <gtest/gtest.h>

#include <random>

#include "detm/fuzzy.hpp"

using namespace detm;

TEST(Fuzzy, NormalizedMembershipIsASimplexPoint) {
    const auto fam = sigmoid_band_family();
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
        Vec x(2);
        x << dist(rng), dist(rng);
        const auto m = normalized_membership(fam, x);
        ASSERT_EQ(m.size(), 2u);
        double sum = 0.0;
        for (std::size_t l = 0; l < m.size(); ++l) {
            EXPECT_GE(m[l], 0.0);
            sum += m[l];
        }
        EXPECT_NEAR(sum, 1.0, 1e-14);
    }
}

TEST(Fuzzy, SigmoidFamilyValueAtOrigin) {
    // at x1 = 0: upper grade 0.5, lower 0.4; complement rule upper 0.6, lower 0.4.
    // blended with equal weights: [0.45, 0.5] -> normalized [9/19, 10/19].
    const auto fam = sigmoid_band_family();
    Vec x = Vec::Zero(2);
    const auto m = normalized_membership(fam, x);
    EXPECT_NEAR(m[0], 0.45 / 0.95, 1e-14);
    EXPECT_NEAR(m[1], 0.50 / 0.95, 1e-14);
}

TEST(Fuzzy, IntervalOrderHoldsOnSamples) {
    const auto fam = sigmoid_band_family();
    std::vector<Vec> samples;
    for (double v = -6.0; v <= 6.0; v += 0.25) {
        Vec x(2);
        x << v, -v;
        samples.push_back(x);
    }
    EXPECT_TRUE(check_interval_order(fam, samples));
}

TEST(Fuzzy, IntervalOrderViolationDetected) {
    IT2MembershipFamily bad;
    auto half = [](const Vec&) { return 0.5; };
    // lower grade above the upper grade
    bad.rules.push_back({[](const Vec&) { return 0.9; }, [](const Vec&) { return 0.2; }, half, half});
    EXPECT_FALSE(check_interval_order(bad, {Vec::Zero(1)}));
}

TEST(Fuzzy, AllZeroGradesThrow) {
    IT2MembershipFamily fam;
    auto zero = [](const Vec&) { return 0.0; };
    auto half = [](const Vec&) { return 0.5; };
    fam.rules.push_back({zero, zero, half, half});
    fam.rules.push_back({zero, zero, half, half});
    EXPECT_THROW(normalized_membership(fam, Vec::Zero(2)), ZeroDenominator);
}

TEST(Fuzzy, TabulatedFamilyInterpolatesAndClamps) {
    const auto fam = tabulated_family(0, {-1.0, 0.0, 1.0},
                                      {{0.0, 0.4, 0.8}, {0.8, 0.4, 0.0}},
                                      {{0.2, 0.6, 1.0}, {1.0, 0.6, 0.2}});
    Vec x(1);
    x << 0.5;  // halfway between grid points 0 and 1
    EXPECT_NEAR(fam.rules[0].lower(x), 0.6, 1e-14);
    EXPECT_NEAR(fam.rules[0].upper(x), 0.8, 1e-14);
    x << 10.0;  // clamped at the right end
    EXPECT_NEAR(fam.rules[0].upper(x), 1.0, 1e-14);
    x << -10.0;
    EXPECT_NEAR(fam.rules[1].upper(x), 1.0, 1e-14);
}

TEST(Fuzzy, TabulatedFamilyRejectsRaggedTables) {
    EXPECT_THROW(tabulated_family(0, {0.0, 1.0}, {{0.0}}, {{0.0, 1.0}}), ValidationError);
}
