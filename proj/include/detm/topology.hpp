#pragma once

#include <vector>

#include <Eigen/Dense>

#include "detm/errors.hpp"

namespace detm {

/// Directed communication graph: adjacency weights a_ij plus pinning gains b_i.
struct Topology {
    Eigen::MatrixXd a;  // N x N, a_ii = 0
    Eigen::VectorXd b;  // length N

    int agent_count() const { return static_cast<int>(b.size()); }
};

struct GraphMatrices {
    std::vector<Eigen::MatrixXd> L_i;  // nonzero only in row i
    std::vector<Eigen::MatrixXd> R_i;  // b_i at (i,i)
    Eigen::MatrixXd L;                 // sum of L_i
    Eigen::MatrixXd R;                 // diag(b)
    Eigen::VectorXd row_degree;        // a_bar_i = sum_j a_ij

    int agent_count() const { return static_cast<int>(L.rows()); }
};

/// Detects whether the weighted digraph (a) is strongly connected.
inline bool strongly_connected(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    auto reach = [&](bool transpose) {
        std::vector<bool> seen(n, false);
        std::vector<int> stack{0};
        seen[0] = true;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v = 0; v < n; ++v) {
                const double w = transpose ? a(v, u) : a(u, v);
                if (w > 0.0 && !seen[v]) {
                    seen[v] = true;
                    stack.push_back(v);
                }
            }
        }
        for (bool s : seen)
            if (!s) return false;
        return true;
    };
    return reach(false) && reach(true);
}

inline GraphMatrices build_graph_matrices(const Topology& topo) {
    const int N = topo.agent_count();
    if (topo.a.rows() != N || topo.a.cols() != N)
        throw DimensionMismatch("adjacency must be N x N");
    if ((topo.a.array() < 0.0).any() || (topo.b.array() < 0.0).any())
        throw NegativeWeight("adjacency and pinning weights must be nonnegative");

    GraphMatrices g;
    g.row_degree = topo.a.rowwise().sum();
    g.L = Eigen::MatrixXd::Zero(N, N);
    g.R = Eigen::MatrixXd::Zero(N, N);
    for (int i = 0; i < N; ++i) {
        Eigen::MatrixXd Li = Eigen::MatrixXd::Zero(N, N);
        Li(i, i) = g.row_degree(i);
        for (int j = 0; j < N; ++j)
            if (j != i) Li(i, j) = -topo.a(i, j);
        Li(i, i) -= topo.a(i, i);  // a_ii is zero by convention; keep row sum exact
        Eigen::MatrixXd Ri = Eigen::MatrixXd::Zero(N, N);
        Ri(i, i) = topo.b(i);
        g.L += Li;
        g.R += Ri;
        g.L_i.push_back(std::move(Li));
        g.R_i.push_back(std::move(Ri));
    }
    return g;
}

}  // namespace detm
