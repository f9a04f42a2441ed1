#include <gtest/gtest.h>

#include <random>

#include "detm/detm.hpp"

using namespace detm;

namespace {

DetmParams basic_params(int kappa = 2, int n_x = 2) {
    DetmParams p;
    p.alpha = 0.02;
    p.beta = 0.5;
    p.theta = 0.02;
    p.omega = Mat::Identity(n_x, n_x);
    p.H = geometric_H(kappa, n_x);
    p.kappa = kappa;
    return p;
}

GraphMatrices two_agent_graph() {
    Topology topo;
    topo.a = Mat::Zero(2, 2);
    topo.a(0, 1) = topo.a(1, 0) = 1.0;
    topo.b = Vec::Ones(2);
    return build_graph_matrices(topo);
}

}  // namespace

TEST(Detm, MemoryWeightingShapes) {
    const Mat Hm = memoryless_H(3, 2);
    EXPECT_EQ(Hm.rows(), 2);
    EXPECT_EQ(Hm.cols(), 6);
    EXPECT_TRUE(Hm.leftCols(4).isZero());
    EXPECT_TRUE(Hm.rightCols(2).isApprox(Mat::Identity(2, 2)));

    const Mat Hg = geometric_H(3, 2);
    // newest block (rightmost) has weight 1, then 1/2, then 1/4 into the past
    EXPECT_DOUBLE_EQ(Hg(0, 4), 1.0);
    EXPECT_DOUBLE_EQ(Hg(0, 2), 0.5);
    EXPECT_DOUBLE_EQ(Hg(0, 0), 0.25);
}

TEST(Detm, ParamValidation) {
    auto p = basic_params();
    EXPECT_NO_THROW(p.validate());
    p.beta = 1.5;
    EXPECT_THROW(p.validate(), ValidationError);
    p = basic_params();
    p.omega = -Mat::Identity(2, 2);
    EXPECT_THROW(p.validate(), ValidationError);
    p = basic_params();
    // weights must not grow into the past
    p.H = Mat::Zero(2, 4);
    p.H.leftCols(2) = 2.0 * Mat::Identity(2, 2);
    p.H.rightCols(2) = Mat::Identity(2, 2);
    EXPECT_THROW(p.validate(), ValidationError);
}

TEST(Detm, ThresholdStaysInsideBand) {
    const auto p = basic_params();
    std::mt19937 rng(5);
    std::normal_distribution<double> dist(0.0, 2.0);
    for (int trial = 0; trial < 100000; ++trial) {
        Vec e(2);
        e << dist(rng), dist(rng);
        const double d = dynamic_threshold(p, e);
        EXPECT_GE(d, p.alpha * (1.0 - p.beta));
        EXPECT_LE(d, p.alpha * (1.0 + p.beta));
    }
}

TEST(Detm, ZeroBetaIsStaticThresholdBitwise) {
    auto p = basic_params();
    p.beta = 0.0;
    std::mt19937 rng(9);
    std::normal_distribution<double> dist(0.0, 3.0);
    for (int trial = 0; trial < 1000; ++trial) {
        Vec e(2);
        e << dist(rng), dist(rng);
        EXPECT_EQ(dynamic_threshold(p, e), p.alpha);  // exact equality
    }
}

TEST(Detm, CombinedMeasurementMatchesGraphRow) {
    const auto graph = two_agent_graph();
    std::vector<Vec> broadcasts(2);
    broadcasts[0] = Vec(2);
    broadcasts[0] << 1.0, 2.0;
    broadcasts[1] = Vec(2);
    broadcasts[1] << -1.0, 0.5;
    const Vec d0 = combined_measurement(graph, broadcasts, 0);
    // row 0 of L+R: 2 on the diagonal (degree 1 + pinning 1), -1 to agent 1
    EXPECT_LT((d0 - (2.0 * broadcasts[0] - broadcasts[1])).norm(), 1e-14);
}

TEST(Detm, InitSeedsRingsAndLogsInitialTrigger) {
    const auto p = basic_params();
    Vec x0(2);
    x0 << 1.0, -1.0;
    Vec d0(2);
    d0 << 3.0, 0.0;
    const auto st = init_detm_state(p, x0, d0);
    EXPECT_EQ(st.trigger_count, 1);
    EXPECT_EQ(st.step_count, 1);
    ASSERT_EQ(st.trigger_log.size(), 1u);
    EXPECT_EQ(st.trigger_log[0], 0);
    ASSERT_EQ(st.e_history.size(), 2u);
    ASSERT_EQ(st.delta_history.size(), 2u);
    EXPECT_TRUE(st.e_history.front().isZero());
    EXPECT_TRUE(st.delta_history.back().isApprox(d0));
}

TEST(Detm, EquilibriumNeverRetriggers) {
    const auto p = basic_params();
    const Vec x0 = Vec::Zero(2);
    auto st = init_detm_state(p, x0, Vec::Zero(2));
    for (int t = 0; t < 10; ++t) EXPECT_FALSE(should_trigger(p, st, x0));
}

TEST(Detm, LargeErrorTriggers) {
    const auto p = basic_params();
    Vec x0(2);
    x0 << 1.0, 1.0;
    auto st = init_detm_state(p, x0, Vec::Ones(2));
    Vec far(2);
    far << 5.0, -5.0;  // large deviation from the held broadcast
    EXPECT_TRUE(should_trigger(p, st, far));
}

TEST(Detm, OnStepCommitsBroadcastAndDelta) {
    const auto p = basic_params();
    const auto graph = two_agent_graph();
    std::vector<Vec> broadcasts(2, Vec::Ones(2));
    auto st = init_detm_state(p, broadcasts[0], combined_measurement(graph, broadcasts, 0));
    Vec x_now(2);
    x_now << 4.0, 4.0;
    const bool fired = on_step(p, st, x_now, broadcasts, graph, 0, 3);
    ASSERT_TRUE(fired);
    EXPECT_TRUE(broadcasts[0].isApprox(x_now));
    EXPECT_TRUE(st.error.isZero());
    EXPECT_EQ(st.trigger_log.back(), 3);
    EXPECT_EQ(st.trigger_count, 2);
    EXPECT_EQ(st.step_count, 2);
    // the refreshed delta uses the updated broadcast table
    const Vec expect = 2.0 * x_now - broadcasts[1];
    EXPECT_TRUE(st.delta_history.back().isApprox(expect));
}

TEST(Detm, WeightOverrideReplacesFactoredForm) {
    auto p = basic_params();
    const Mat factored = p.stacked_weight();
    EXPECT_TRUE(factored.isApprox(p.H.transpose() * p.omega * p.H));
    p.weight_override = Mat::Identity(4, 4);
    EXPECT_TRUE(p.stacked_weight().isApprox(Mat::Identity(4, 4)));
}

TEST(Detm, TriggeredRateCountsAllSteps) {
    DetmState st;
    st.trigger_count = 3;
    st.step_count = 10;
    EXPECT_DOUBLE_EQ(triggered_rate(st), 0.3);
    st.step_count = 0;
    EXPECT_THROW(triggered_rate(st), ValidationError);
}
