#include <gtest/gtest.h>

#include "detm/topology.hpp"

using namespace detm;

namespace {

Topology ring4() {
    Topology t;
    t.a = Eigen::MatrixXd::Zero(4, 4);
    t.a(0, 3) = t.a(1, 0) = t.a(2, 1) = t.a(3, 2) = 1.0;
    t.b = Eigen::VectorXd::Ones(4);
    return t;
}

}  // namespace

TEST(Topology, RingGraphMatrices) {
    const auto g = build_graph_matrices(ring4());
    ASSERT_EQ(g.agent_count(), 4);
    // row 0 of L: degree 1 on the diagonal, -1 toward the in-neighbor 3
    EXPECT_DOUBLE_EQ(g.L(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(g.L(0, 3), -1.0);
    EXPECT_DOUBLE_EQ(g.L(0, 1), 0.0);
    // every row of a Laplacian sums to zero
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(g.L.row(i).sum(), 0.0, 1e-15);
    // R is the pinning diagonal
    EXPECT_TRUE(g.R.isApprox(Eigen::MatrixXd::Identity(4, 4)));
    // the per-agent pieces add back up to the totals
    Eigen::MatrixXd sumL = Eigen::MatrixXd::Zero(4, 4);
    Eigen::MatrixXd sumR = Eigen::MatrixXd::Zero(4, 4);
    for (int i = 0; i < 4; ++i) {
        sumL += g.L_i[i];
        sumR += g.R_i[i];
        // L_i is nonzero only in row i
        for (int r = 0; r < 4; ++r)
            if (r != i) EXPECT_DOUBLE_EQ(g.L_i[i].row(r).cwiseAbs().sum(), 0.0);
    }
    EXPECT_TRUE(sumL.isApprox(g.L));
    EXPECT_TRUE(sumR.isApprox(g.R));
    EXPECT_TRUE(g.row_degree.isApprox(Eigen::VectorXd::Ones(4)));
}

TEST(Topology, NegativeWeightsRejected) {
    Topology t = ring4();
    t.a(0, 3) = -1.0;
    EXPECT_THROW(build_graph_matrices(t), NegativeWeight);
    t = ring4();
    t.b(2) = -0.5;
    EXPECT_THROW(build_graph_matrices(t), NegativeWeight);
}

TEST(Topology, DimensionMismatchRejected) {
    Topology t = ring4();
    t.a = Eigen::MatrixXd::Zero(3, 4);
    EXPECT_THROW(build_graph_matrices(t), DimensionMismatch);
}

TEST(Topology, StrongConnectivity) {
    EXPECT_TRUE(strongly_connected(ring4().a));
    Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(3, 3);
    chain(1, 0) = chain(2, 1) = 1.0;  // no path back to node 0
    EXPECT_FALSE(strongly_connected(chain));
}
