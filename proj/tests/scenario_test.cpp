#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "detm/scenario.hpp"

using namespace detm;

namespace {
const std::string kScenarioDir = std::string(DETM_SOURCE_DIR) + "/scenarios";
}

TEST(Scenario, BundledRing4Loads) {
    const auto cfg = load_scenario(kScenarioDir + "/ring4.json");
    EXPECT_EQ(cfg.agent_count(), 4);
    EXPECT_EQ(cfg.kappa, 2);
    EXPECT_EQ(cfg.horizon, 200);
    EXPECT_DOUBLE_EQ(cfg.agents[0].alpha, 0.02);
    EXPECT_DOUBLE_EQ(cfg.agents[1].alpha, 0.03);
    EXPECT_DOUBLE_EQ(cfg.agents[2].alpha, 0.02);
    EXPECT_DOUBLE_EQ(cfg.agents[3].alpha, 0.03);
    for (const auto& a : cfg.agents) EXPECT_DOUBLE_EQ(a.beta, 0.5);
    EXPECT_DOUBLE_EQ(cfg.agents[0].theta, 0.02);
    EXPECT_DOUBLE_EQ(cfg.agents[1].theta, 0.3);
    EXPECT_DOUBLE_EQ(cfg.agents[0].rules[0].A(0, 0), 0.8);
    EXPECT_DOUBLE_EQ(cfg.agents[1].rules[1].A(1, 0), 0.55);
    EXPECT_DOUBLE_EQ(cfg.agents[3].rules[1].B(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(cfg.topology.a(0, 3), 1.0);
    EXPECT_TRUE(cfg.topology.b.isApprox(Vec::Ones(4)));
    Vec x0_3(2);
    x0_3 << 4.0, 4.0;
    EXPECT_TRUE(cfg.agents[3].x0.isApprox(x0_3));

    // derived builders agree with the raw fields
    const auto params = cfg.build_detm_params();
    ASSERT_EQ(params.size(), 4u);
    EXPECT_EQ(params[0].kappa, 2);
    EXPECT_TRUE(params[0].omega.isApprox(Mat::Identity(2, 2)));  // default weight
    EXPECT_TRUE(params[0].H.isApprox(geometric_H(2, 2)));        // default weighting
    const auto agents = cfg.build_agents();
    EXPECT_EQ(agents[0].rule_count(), 2);
}

TEST(Scenario, RoundTripIsSemanticallyIdentical) {
    const auto cfg = load_scenario(kScenarioDir + "/ring4.json");
    const std::string path = ::testing::TempDir() + "scenario_roundtrip.json";
    save_scenario(path, cfg);
    const auto back = load_scenario(path);
    EXPECT_EQ(back.name, cfg.name);
    EXPECT_EQ(back.kappa, cfg.kappa);
    EXPECT_EQ(back.horizon, cfg.horizon);
    EXPECT_EQ(back.memory_weighting, cfg.memory_weighting);
    ASSERT_EQ(back.agent_count(), cfg.agent_count());
    for (int i = 0; i < cfg.agent_count(); ++i) {
        const auto& a = cfg.agents[i];
        const auto& b = back.agents[i];
        ASSERT_EQ(a.rules.size(), b.rules.size());
        for (std::size_t r = 0; r < a.rules.size(); ++r) {
            EXPECT_TRUE((a.rules[r].A.array() == b.rules[r].A.array()).all());
            EXPECT_TRUE((a.rules[r].B.array() == b.rules[r].B.array()).all());
        }
        EXPECT_EQ(a.alpha, b.alpha);
        EXPECT_EQ(a.beta, b.beta);
        EXPECT_EQ(a.theta, b.theta);
        EXPECT_TRUE((a.x0.array() == b.x0.array()).all());
    }
    EXPECT_TRUE((cfg.topology.a.array() == back.topology.a.array()).all());
    std::remove(path.c_str());
}

TEST(Scenario, ReferenceGainFileIsExact) {
    const auto gains = load_gains(kScenarioDir + "/ring4_reference_gains.json");
    ASSERT_EQ(gains.size(), 4u);
    EXPECT_EQ(gains[0].kappa, 2);
    EXPECT_DOUBLE_EQ(gains[0].stacked[0](0, 0), -0.003042760);
    EXPECT_DOUBLE_EQ(gains[0].stacked[0](0, 3), 0.002936131);
    EXPECT_DOUBLE_EQ(gains[1].stacked[1](0, 0), -0.548400809);
    EXPECT_DOUBLE_EQ(gains[3].stacked[0](0, 3), -0.018194835);
    // the most recent block is the rightmost pair
    EXPECT_DOUBLE_EQ(gains[0].block(0, 1)(0, 0), 0.010595568);
    EXPECT_DOUBLE_EQ(gains[0].block(0, 2)(0, 0), -0.003042760);
}

TEST(Scenario, ShapeErrorsAreNamed) {
    auto cfg = load_scenario(kScenarioDir + "/ring4.json");
    cfg.agents[2].rules[0].A = Mat::Zero(3, 2);
    try {
        cfg.validate();
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("agent 2"), std::string::npos);
    }
    cfg = load_scenario(kScenarioDir + "/ring4.json");
    cfg.agents[1].x0 = Vec::Zero(3);
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = load_scenario(kScenarioDir + "/ring4.json");
    cfg.kappa = 0;
    EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Scenario, ParseErrorsAreTyped) {
    EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), ParseError);
    const std::string path = ::testing::TempDir() + "scenario_bad.json";
    {
        std::ofstream out(path);
        out << "{ nope";
    }
    EXPECT_THROW(load_scenario(path), ParseError);
    {
        std::ofstream out(path);
        out << R"({"kappa": 2})";  // missing agents
    }
    EXPECT_THROW(load_scenario(path), ParseError);
    std::remove(path.c_str());
}

TEST(Scenario, SynthesisReportSerializes) {
    SynthesisResult res;
    res.feasible = true;
    res.margin = 1.5e-5;
    res.sigma = 0.1;
    res.backend = "scs";
    res.P = Mat::Identity(2, 2);
    res.Omega = {Mat::Identity(2, 2)};
    res.vertex_margins = {2e-5, 3e-5};
    const auto j = synthesis_report(res);
    EXPECT_TRUE(j.at("feasible").get<bool>());
    EXPECT_DOUBLE_EQ(j.at("margin").get<double>(), 1.5e-5);
    EXPECT_DOUBLE_EQ(j.at("worst_vertex_margin").get<double>(), 2e-5);
    EXPECT_EQ(j.at("vertex_count").get<std::size_t>(), 2u);
}
