#pragma once

#include <vector>

#include <Eigen/Dense>

#include "detm/controller.hpp"
#include "detm/errors.hpp"
#include "detm/fuzzy.hpp"
#include "detm/topology.hpp"

namespace detm {

struct FuzzyRule {
    Mat A;  // n_x x n_x
    Mat B;  // n_x x n_u
};

struct AgentModel {
    std::vector<FuzzyRule> rules;
    IT2MembershipFamily plant_membership;
    IT2MembershipFamily controller_membership;

    int state_dim() const { return static_cast<int>(rules.front().A.rows()); }
    int input_dim() const { return static_cast<int>(rules.front().B.cols()); }
    int rule_count() const { return static_cast<int>(rules.size()); }

    void validate() const {
        if (rules.empty()) throw ValidationError("agent needs at least one rule");
        const int nx = state_dim();
        const int nu = input_dim();
        for (const auto& r : rules) {
            if (r.A.rows() != nx || r.A.cols() != nx || r.B.rows() != nx || r.B.cols() != nu)
                throw DimensionMismatch("rule matrices disagree on state/input dimensions");
        }
    }
};

/// kappa-step shift-register lift of an agent's rules.
struct AugmentedModel {
    int kappa = 1;
    int n_x = 0;
    int n_u = 0;
    std::vector<Mat> A_tilde;  // (kappa n_x) x (kappa n_x) per rule
    std::vector<Mat> B_tilde;  // (kappa n_x) x n_u per rule

    int aug_dim() const { return kappa * n_x; }
    int rule_count() const { return static_cast<int>(A_tilde.size()); }
};

/// Block lifts of one agent's augmented rule matrices into the global frame.
struct GlobalBlocks {
    std::vector<Mat> A_bar;  // D x D, nonzero only in the i-th diagonal block
    std::vector<Mat> B_bar;  // D x (N n_u), nonzero only in the i-th block
    int agent = 0;
    int N = 0;
    int aug_dim = 0;
    int n_u = 0;
};

inline Vec step_agent(const AgentModel& model, const Vec& x, const Vec& u) {
    if (x.size() != model.state_dim() || u.size() != model.input_dim())
        throw DimensionMismatch("state/input size mismatch in step_agent");
    const MembershipVector w = normalized_membership(model.plant_membership, x);
    if (w.size() != static_cast<std::size_t>(model.rule_count()))
        throw DimensionMismatch("plant membership rule count mismatch");
    Vec next = Vec::Zero(x.size());
    for (int l = 0; l < model.rule_count(); ++l)
        next += w[static_cast<std::size_t>(l)] * (model.rules[l].A * x + model.rules[l].B * u);
    return next;
}

inline AugmentedModel augment(const AgentModel& model, int kappa) {
    model.validate();
    if (kappa < 1) throw ValidationError("memory depth kappa must be >= 1");
    AugmentedModel aug;
    aug.kappa = kappa;
    aug.n_x = model.state_dim();
    aug.n_u = model.input_dim();
    const int n = aug.aug_dim();
    for (const auto& r : model.rules) {
        Mat At = Mat::Zero(n, n);
        // top (kappa-1) block rows shift the register: [0 I]
        if (kappa > 1)
            At.block(0, aug.n_x, (kappa - 1) * aug.n_x, (kappa - 1) * aug.n_x) =
                Mat::Identity((kappa - 1) * aug.n_x, (kappa - 1) * aug.n_x);
        // bottom block row: [0 ... 0 A_l]
        At.block((kappa - 1) * aug.n_x, (kappa - 1) * aug.n_x, aug.n_x, aug.n_x) = r.A;
        Mat Bt = Mat::Zero(n, aug.n_u);
        Bt.block((kappa - 1) * aug.n_x, 0, aug.n_x, aug.n_u) = r.B;
        aug.A_tilde.push_back(std::move(At));
        aug.B_tilde.push_back(std::move(Bt));
    }
    return aug;
}

inline std::vector<GlobalBlocks> assemble_global(const std::vector<AugmentedModel>& models) {
    const int N = static_cast<int>(models.size());
    if (N == 0) throw ValidationError("no agents");
    const int kappa = models.front().kappa;
    const int n = models.front().aug_dim();
    const int n_u = models.front().n_u;
    for (const auto& m : models)
        if (m.kappa != kappa || m.aug_dim() != n || m.n_u != n_u)
            throw HeterogeneousDims("all agents must share kappa, n_x and n_u");

    const int D = N * n;
    std::vector<GlobalBlocks> out;
    for (int i = 0; i < N; ++i) {
        GlobalBlocks gb;
        gb.agent = i;
        gb.N = N;
        gb.aug_dim = n;
        gb.n_u = n_u;
        for (int l = 0; l < models[i].rule_count(); ++l) {
            Mat Ab = Mat::Zero(D, D);
            Ab.block(i * n, i * n, n, n) = models[i].A_tilde[l];
            Mat Bb = Mat::Zero(D, N * n_u);
            Bb.block(i * n, i * n_u, n, n_u) = models[i].B_tilde[l];
            gb.A_bar.push_back(std::move(Ab));
            gb.B_bar.push_back(std::move(Bb));
        }
        out.push_back(std::move(gb));
    }
    return out;
}

/// Global closed-loop pair (Lambda_A, Lambda_B) for one fixed rule choice per
/// agent: x(t+1) = Lambda_A x(t) + Lambda_B e(t) over the stacked augmented state.
inline std::pair<Mat, Mat> closed_loop_matrix(const std::vector<GlobalBlocks>& blocks,
                                              const GraphMatrices& graph,
                                              const std::vector<MemoryGains>& gains,
                                              const std::vector<int>& plant_rule,
                                              const std::vector<int>& ctrl_rule) {
    const int N = static_cast<int>(blocks.size());
    const int n = blocks.front().aug_dim;
    const int D = N * n;
    Mat lamA = Mat::Zero(D, D);
    Mat lamB = Mat::Zero(D, D);
    for (int i = 0; i < N; ++i) {
        const Mat& Ab = blocks[i].A_bar[static_cast<std::size_t>(plant_rule[i])];
        const Mat& Bb = blocks[i].B_bar[static_cast<std::size_t>(plant_rule[i])];
        const Mat& K = gains[i].stacked[static_cast<std::size_t>(ctrl_rule[i])];
        if (K.cols() != n) throw DimensionMismatch("gain column count must equal kappa*n_x");
        const Mat LR = graph.L_i[i] + graph.R_i[i];
        Mat coupled = Bb * kron(LR, K);  // D x D
        lamA += Ab + coupled;
        lamB += coupled;
    }
    return {lamA, lamB};
}

/// Membership-weighted variant: per-agent plant/controller weights blend the
/// rule matrices and gains before assembly.
inline std::pair<Mat, Mat> closed_loop_matrix_blended(const std::vector<GlobalBlocks>& blocks,
                                                      const GraphMatrices& graph,
                                                      const std::vector<MemoryGains>& gains,
                                                      const std::vector<Vec>& plant_w,
                                                      const std::vector<Vec>& ctrl_w) {
    const int N = static_cast<int>(blocks.size());
    const int n = blocks.front().aug_dim;
    const int D = N * n;
    Mat lamA = Mat::Zero(D, D);
    Mat lamB = Mat::Zero(D, D);
    for (int i = 0; i < N; ++i) {
        const int p = static_cast<int>(blocks[i].A_bar.size());
        const int q = static_cast<int>(gains[i].stacked.size());
        Mat Ab = Mat::Zero(D, D);
        Mat Bb = Mat::Zero(D, blocks[i].N * blocks[i].n_u);
        for (int l = 0; l < p; ++l) {
            Ab += plant_w[i](l) * blocks[i].A_bar[static_cast<std::size_t>(l)];
            Bb += plant_w[i](l) * blocks[i].B_bar[static_cast<std::size_t>(l)];
        }
        Mat K = Mat::Zero(gains[i].stacked.front().rows(), n);
        for (int s = 0; s < q; ++s) K += ctrl_w[i](s) * gains[i].stacked[static_cast<std::size_t>(s)];
        const Mat LR = graph.L_i[i] + graph.R_i[i];
        Mat coupled = Bb * kron(LR, K);
        lamA += Ab + coupled;
        lamB += coupled;
    }
    return {lamA, lamB};
}

}  // namespace detm
