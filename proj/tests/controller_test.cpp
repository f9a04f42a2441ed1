#include <gtest/gtest.h>

#include <cstdio>
#include <deque>

#include "detm/controller.hpp"

using namespace detm;

TEST(Controller, StackHistoryIsOldestFirst) {
    std::deque<Vec> ring;
    Vec a(2), b(2);
    a << 1.0, 2.0;
    b << 3.0, 4.0;
    ring.push_back(a);  // oldest
    ring.push_back(b);  // newest
    const Vec s = stack_history(ring);
    ASSERT_EQ(s.size(), 4);
    EXPECT_DOUBLE_EQ(s(0), 1.0);
    EXPECT_DOUBLE_EQ(s(3), 4.0);
    EXPECT_THROW(stack_history({}), DimensionMismatch);
}

TEST(Controller, BlockAccessorNewestIsRightmost) {
    MemoryGains g;
    g.kappa = 2;
    g.n_x = 2;
    Mat K(1, 4);
    K << 10.0, 20.0, 1.0, 2.0;  // [K^(2) K^(1)]
    g.stacked = {K};
    EXPECT_DOUBLE_EQ(g.block(0, 1)(0, 0), 1.0);   // most recent block
    EXPECT_DOUBLE_EQ(g.block(0, 2)(0, 0), 10.0);  // oldest block
}

TEST(Controller, ControlInputBlendsRuleGains) {
    MemoryGains g;
    g.kappa = 1;
    g.n_x = 2;
    Mat K1(1, 2), K2(1, 2);
    K1 << 1.0, 0.0;
    K2 << 0.0, 1.0;
    g.stacked = {K1, K2};
    MembershipVector m;
    m.values = Vec(2);
    m.values << 0.25, 0.75;
    Vec delta(2);
    delta << 2.0, 4.0;
    const Vec u = control_input(g, m, delta);
    EXPECT_NEAR(u(0), 0.25 * 2.0 + 0.75 * 4.0, 1e-14);
}

TEST(Controller, ControlInputChecksDimensions) {
    MemoryGains g;
    g.kappa = 1;
    g.n_x = 2;
    g.stacked = {Mat::Zero(1, 2)};
    MembershipVector m;
    m.values = Vec::Ones(2);  // two weights, one rule
    EXPECT_THROW(control_input(g, m, Vec::Zero(2)), DimensionMismatch);
    m.values = Vec::Ones(1);
    EXPECT_THROW(control_input(g, m, Vec::Zero(3)), DimensionMismatch);
}

TEST(Controller, GainFileRoundTripIsExact) {
    std::vector<MemoryGains> gains(2);
    for (int i = 0; i < 2; ++i) {
        gains[i].kappa = 2;
        gains[i].n_x = 2;
        Mat K(1, 4);
        K << -0.003042760, -0.016776025, 0.010595568, 0.002936131;
        gains[i].stacked = {K, 2.0 * K};
    }
    const std::string path = ::testing::TempDir() + "gains_roundtrip.json";
    save_gains(path, gains);
    const auto loaded = load_gains(path);
    ASSERT_EQ(loaded.size(), 2u);
    for (int i = 0; i < 2; ++i) {
        EXPECT_EQ(loaded[i].kappa, 2);
        EXPECT_EQ(loaded[i].n_x, 2);
        for (int s = 0; s < 2; ++s)
            EXPECT_TRUE((loaded[i].stacked[s].array() == gains[i].stacked[s].array()).all());
    }
    std::remove(path.c_str());
}

TEST(Controller, GainFileErrorsAreTyped) {
    EXPECT_THROW(load_gains("/nonexistent/gains.json"), ParseError);
    const std::string path = ::testing::TempDir() + "gains_bad.json";
    {
        std::ofstream out(path);
        out << "{ not json";
    }
    EXPECT_THROW(load_gains(path), ParseError);
    {
        std::ofstream out(path);
        out << R"({"kappa":2,"n_x":2,"agents":[{"rules":[[[1.0,2.0]]]}]})";  // width 2 != 4
    }
    EXPECT_THROW(load_gains(path), ValidationError);
    std::remove(path.c_str());
}
