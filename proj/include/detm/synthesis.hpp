#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "detm/affine.hpp"
#include "detm/controller.hpp"
#include "detm/errors.hpp"
#include "detm/plant.hpp"
#include "detm/sdp.hpp"
#include "detm/topology.hpp"

namespace detm {

struct SynthesisOptions {
    double sigma = 1.0;                       // slack scaling in the off-diagonal coupling rows
    std::vector<double> sigma_grid;           // fallback values tried if the first fails
    double epsilon = 1e-6;                    // required certified eigenvalue margin
    std::string backend;                      // empty: env DETM_SDP_BACKEND or "scs"
    double solver_eps = 1e-5;
    int solver_max_iters = 20000;
    bool polish = true;                       // native projection refinement of the candidate
    int polish_iters = 300;
    double var_bound = 1e4;
    double margin_cap = 10.0;
};

struct SynthesisResult {
    bool feasible = false;
    double margin = 0.0;                      // min eigenvalue over all certificate blocks
    double sigma = 1.0;
    Mat P;                                    // D x D
    std::vector<Mat> Omega;                   // per agent, n x n (n = kappa*n_x)
    std::vector<std::vector<Mat>> X;          // [agent][rule], n_u x n_u
    std::vector<std::vector<Mat>> Ytilde;     // [agent][rule], n_u x n
    std::vector<MemoryGains> gains;           // recovered K = X^{-1} Y
    std::vector<double> vertex_margins;       // min eig of -Xi per vertex
    std::string backend;
    std::string solver_detail;
};

struct VerifyReport {
    bool ok = false;
    double worst_eig = 0.0;                   // max over vertices of lambda_max(Theta)
    std::vector<int> worst_plant_rule;
    std::vector<int> worst_ctrl_rule;
    int vertices_checked = 0;
};

namespace detail {

inline void for_each_vertex(const std::vector<int>& plant_rules,
                            const std::vector<int>& ctrl_rules,
                            const std::function<void(const std::vector<int>&,
                                                     const std::vector<int>&)>& fn) {
    const int N = static_cast<int>(plant_rules.size());
    std::vector<int> l(static_cast<std::size_t>(N), 0), s(static_cast<std::size_t>(N), 0);
    while (true) {
        fn(l, s);
        // odometer over (l, s)
        int pos = 0;
        for (; pos < 2 * N; ++pos) {
            auto& digit = pos < N ? l[static_cast<std::size_t>(pos)]
                                  : s[static_cast<std::size_t>(pos - N)];
            const int radix = pos < N ? plant_rules[static_cast<std::size_t>(pos)]
                                      : ctrl_rules[static_cast<std::size_t>(pos - N)];
            if (++digit < radix) break;
            digit = 0;
        }
        if (pos == 2 * N) return;
    }
}

}  // namespace detail

/// Holds the decision-variable layout and the per-agent cached blocks of the
/// vertex LMIs so each vertex can be assembled by summation.
class LmiWorkspace {
  public:
    LmiWorkspace(const std::vector<AugmentedModel>& models, const GraphMatrices& graph,
                 const std::vector<double>& alpha, const std::vector<double>& beta, double sigma)
        : sigma_(sigma) {
        const int N = static_cast<int>(models.size());
        if (static_cast<int>(alpha.size()) != N || static_cast<int>(beta.size()) != N)
            throw DimensionMismatch("alpha/beta must have one entry per agent");
        if (static_cast<int>(graph.L_i.size()) != N)
            throw DimensionMismatch("graph matrices must match agent count");
        N_ = N;
        n_ = models.front().aug_dim();
        n_u_ = models.front().n_u;
        D_ = N_ * n_;
        dim_ = 3 * D_ + N_ * N_ * n_u_;

        const auto blocks = assemble_global(models);

        P_ = vars_.symmetric(D_);
        for (int i = 0; i < N_; ++i) Omega_.push_back(vars_.symmetric(n_));
        X_.resize(static_cast<std::size_t>(N_));
        Y_.resize(static_cast<std::size_t>(N_));
        for (int i = 0; i < N_; ++i) {
            for (int s = 0; s < models[static_cast<std::size_t>(i)].rule_count(); ++s) {
                X_[static_cast<std::size_t>(i)].push_back(vars_.symmetric(n_u_));
                Y_[static_cast<std::size_t>(i)].push_back(vars_.full(n_u_, n_));
            }
        }

        // Lambda_E = ((L+R) kron I_n)^T Gamma ((L+R) kron I_n), Gamma and
        // Upsilon block-diagonal in the per-agent trigger weights.
        const Mat CLR = kron(graph.L + graph.R, Mat::Identity(n_, n_));
        AffineMat Gamma(D_, D_);
        Upsilon_ = AffineMat(D_, D_);
        for (int i = 0; i < N_; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            Gamma.place(i * n_, i * n_,
                        Omega_[ui].scaled(alpha[ui] * (1.0 + beta[ui])));
            Upsilon_.place(i * n_, i * n_, Omega_[ui]);
        }
        LambdaE_ = CLR.transpose() * (Gamma * CLR);

        // per (agent, plant rule, ctrl rule) pieces; a vertex LMI is the fixed
        // frame plus the sum of one piece per agent.
        pieces_.resize(static_cast<std::size_t>(N_));
        for (int i = 0; i < N_; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const Mat LR = graph.L_i[ui] + graph.R_i[ui];
            const int p = models[ui].rule_count();
            const int q = static_cast<int>(X_[ui].size());
            pieces_[ui].resize(static_cast<std::size_t>(p),
                               std::vector<Piece>(static_cast<std::size_t>(q)));
            for (int l = 0; l < p; ++l) {
                const Mat& Bb = blocks[ui].B_bar[static_cast<std::size_t>(l)];
                const Mat& Ab = blocks[ui].A_bar[static_cast<std::size_t>(l)];
                for (int s = 0; s < q; ++s) {
                    Piece pc;
                    pc.Xi1 = Bb * Y_[ui][static_cast<std::size_t>(s)].kron_left(LR);
                    pc.Xi5 = P_ * Ab + pc.Xi1;
                    const AffineMat PB = P_ * (Bb * kron(LR, Mat::Identity(n_u_, n_u_)));
                    const AffineMat BX = Bb * X_[ui][static_cast<std::size_t>(s)].kron_left(LR);
                    pc.Xi2 = (PB - BX).transposed();
                    pc.Xi3 = X_[ui][static_cast<std::size_t>(s)].kron_left(Mat::Identity(N_, N_));
                    pc.Xi4 = Y_[ui][static_cast<std::size_t>(s)].kron_left(Mat::Identity(N_, N_));
                    pieces_[ui][static_cast<std::size_t>(l)][static_cast<std::size_t>(s)] =
                        std::move(pc);
                }
            }
        }
    }

    int num_vars() const { return vars_.count(); }
    int dim() const { return dim_; }
    int D() const { return D_; }
    int aug_dim() const { return n_; }
    int agent_count() const { return N_; }

    const AffineMat& P() const { return P_; }
    const AffineMat& Omega(int i) const { return Omega_[static_cast<std::size_t>(i)]; }
    const AffineMat& X(int i, int s) const {
        return X_[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
    }
    const AffineMat& Y(int i, int s) const {
        return Y_[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
    }
    int rule_count(int i) const { return static_cast<int>(X_[static_cast<std::size_t>(i)].size()); }

    /// Assembles the full LMI block matrix for one rule vertex. The result is
    /// exactly symmetric; a negative-definite value certifies the vertex.
    AffineMat assemble_vertex(const std::vector<int>& l, const std::vector<int>& s) const {
        if (static_cast<int>(l.size()) != N_ || static_cast<int>(s.size()) != N_)
            throw DimensionMismatch("vertex index length must equal agent count");
        AffineMat Xi(dim_, dim_);
        Xi.place(0, 0, P_.scaled(-1.0));
        Xi.place(0, 0, LambdaE_);
        Xi.place(D_, 0, LambdaE_);
        Xi.place(0, D_, LambdaE_.transposed());
        Xi.place(D_, D_, LambdaE_);
        Xi.place(D_, D_, Upsilon_.scaled(-1.0));
        Xi.place(2 * D_, 2 * D_, P_.scaled(-1.0));
        for (int i = 0; i < N_; ++i) {
            const Piece& pc = pieces_[static_cast<std::size_t>(i)]
                                     [static_cast<std::size_t>(l[static_cast<std::size_t>(i)])]
                                     [static_cast<std::size_t>(s[static_cast<std::size_t>(i)])];
            Xi.place(2 * D_, 0, pc.Xi5);
            Xi.place(0, 2 * D_, pc.Xi5.transposed());
            Xi.place(2 * D_, D_, pc.Xi1);
            Xi.place(D_, 2 * D_, pc.Xi1.transposed());
            // Slack rows are stacked per agent: agent i owns the (N n_u)-row
            // band at offset 3D + i*N*n_u, with the X-slack on its diagonal.
            const int off = 3 * D_ + i * N_ * n_u_;
            const AffineMat sXi4 = pc.Xi4.scaled(sigma_);
            Xi.place(off, 0, sXi4);
            Xi.place(0, off, sXi4.transposed());
            Xi.place(off, D_, sXi4);
            Xi.place(D_, off, sXi4.transposed());
            Xi.place(off, 2 * D_, pc.Xi2);
            Xi.place(2 * D_, off, pc.Xi2.transposed());
            Xi.place(off, off, (pc.Xi3 + pc.Xi3.transposed()).scaled(-sigma_));
        }
        if (Xi.max_asymmetry() > 0.0)
            throw ValidationError("assembled LMI block lost symmetry");
        return Xi;
    }

  private:
    struct Piece {
        AffineMat Xi1;  // D x D       coupled input block
        AffineMat Xi5;  // D x D       P*A + coupled block
        AffineMat Xi2;  // (N n_u) x D decoupling residual, transposed
        AffineMat Xi3;  // (N n_u) sq  slack scaling
        AffineMat Xi4;  // (N n_u) x D gain variable row
    };

    VariableSpace vars_;
    AffineMat P_;
    std::vector<AffineMat> Omega_;
    std::vector<std::vector<AffineMat>> X_;
    std::vector<std::vector<AffineMat>> Y_;
    AffineMat LambdaE_;
    AffineMat Upsilon_;
    std::vector<std::vector<std::vector<Piece>>> pieces_;
    double sigma_ = 1.0;
    int N_ = 0, n_ = 0, n_u_ = 0, D_ = 0, dim_ = 0;
};

/// Convenience wrapper matching the one-vertex granularity of the assembly.
inline AffineMat assemble_vertex_lmi(const LmiWorkspace& ws, const std::vector<int>& plant_rule,
                                     const std::vector<int>& ctrl_rule) {
    return ws.assemble_vertex(plant_rule, ctrl_rule);
}

namespace detail {

inline SdpProblem build_sdp(const LmiWorkspace& ws, const std::vector<int>& p_rules,
                            const std::vector<int>& q_rules, const SynthesisOptions& opt) {
    SdpProblem prob;
    prob.num_vars = ws.num_vars();
    prob.var_bound = opt.var_bound;
    prob.margin_cap = opt.margin_cap;
    prob.solver_eps = opt.solver_eps;
    prob.max_iters = opt.solver_max_iters;
    prob.constraints.push_back(AffineConstraint::from_affine(ws.P()));
    for (int i = 0; i < ws.agent_count(); ++i)
        prob.constraints.push_back(AffineConstraint::from_affine(ws.Omega(i)));
    for_each_vertex(p_rules, q_rules, [&](const std::vector<int>& l, const std::vector<int>& s) {
        prob.constraints.push_back(
            AffineConstraint::from_affine(ws.assemble_vertex(l, s).scaled(-1.0)));
    });
    return prob;
}

inline SynthesisResult extract(const LmiWorkspace& ws, const SdpProblem& prob,
                               const Eigen::VectorXd& y, int kappa, int n_x, double sigma,
                               double epsilon) {
    SynthesisResult res;
    res.sigma = sigma;
    res.P = ws.P().eval(y);
    for (int i = 0; i < ws.agent_count(); ++i) res.Omega.push_back(ws.Omega(i).eval(y));
    res.X.resize(static_cast<std::size_t>(ws.agent_count()));
    res.Ytilde.resize(static_cast<std::size_t>(ws.agent_count()));
    for (int i = 0; i < ws.agent_count(); ++i) {
        MemoryGains g;
        g.kappa = kappa;
        g.n_x = n_x;
        for (int s = 0; s < ws.rule_count(i); ++s) {
            Mat Xis = ws.X(i, s).eval(y);
            Mat Yis = ws.Y(i, s).eval(y);
            Eigen::JacobiSVD<Mat> svd(Xis, Eigen::ComputeThinU | Eigen::ComputeThinV);
            const double smin = svd.singularValues().minCoeff();
            const double smax = svd.singularValues().maxCoeff();
            if (smin <= 0.0 || smax / smin > 1e10)
                throw IllConditioned("gain recovery: X block condition number exceeds 1e10");
            Mat K = svd.solve(Yis);
            if ((Xis * K - Yis).norm() > 1e-8 * std::max(1.0, Yis.norm()))
                throw IllConditioned("gain recovery residual too large");
            res.X[static_cast<std::size_t>(i)].push_back(std::move(Xis));
            res.Ytilde[static_cast<std::size_t>(i)].push_back(std::move(Yis));
            g.stacked.push_back(std::move(K));
        }
        res.gains.push_back(std::move(g));
    }
    res.margin = true_margin(prob, y);
    // per-vertex margins: constraints after P and the Omegas are the vertices
    for (std::size_t c = static_cast<std::size_t>(1 + ws.agent_count());
         c < prob.constraints.size(); ++c) {
        Mat m = prob.constraints[c].eval(y);
        m = 0.5 * (m + m.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
        res.vertex_margins.push_back(es.eigenvalues().minCoeff());
    }
    res.feasible = res.margin >= epsilon;
    return res;
}

}  // namespace detail

/// Solves the vertex LMI family for a stabilizing memory gain set. Throws
/// InfeasibleError if no sigma in the grid yields the required margin.
inline SynthesisResult solve(const std::vector<AgentModel>& agents, const Topology& topology,
                             const std::vector<double>& alpha, const std::vector<double>& beta,
                             int kappa, const SynthesisOptions& opt = {}) {
    for (const auto& a : agents) a.validate();
    std::vector<AugmentedModel> models;
    for (const auto& a : agents) models.push_back(augment(a, kappa));
    const GraphMatrices graph = build_graph_matrices(topology);
    const int n_x = agents.front().state_dim();

    std::vector<int> p_rules, q_rules;
    for (const auto& a : agents) {
        p_rules.push_back(a.rule_count());
        q_rules.push_back(a.rule_count());
    }

    std::vector<double> sigmas = {opt.sigma};
    for (double s : opt.sigma_grid)
        if (s != opt.sigma) sigmas.push_back(s);

    auto backend = make_backend(opt.backend);
    SynthesisResult best;
    bool have_best = false;
    std::string last_detail;
    for (double sigma : sigmas) {
        LmiWorkspace ws(models, graph, alpha, beta, sigma);
        SdpProblem prob = detail::build_sdp(ws, p_rules, q_rules, opt);
        SdpSolution sol = backend->solve(prob);
        if (sol.status == SdpSolution::Status::Failure)
            throw BackendFailure("SDP backend '" + backend->name() + "' failed: " + sol.detail);
        if (sol.status == SdpSolution::Status::Infeasible) {
            last_detail = sol.detail.empty() ? "solver reported infeasible" : sol.detail;
            continue;
        }
        Eigen::VectorXd y = sol.y;
        double margin = true_margin(prob, y);
        if (opt.polish && margin < opt.epsilon) {
            const double tau = std::max(10.0 * opt.epsilon, 2.0 * std::abs(margin));
            SdpSolution ref = ProjectionBackend::refine(prob, y, tau, opt.polish_iters);
            if (ref.solver_margin > margin) {
                y = ref.y;
                margin = ref.solver_margin;
            }
        }
        SynthesisResult res = detail::extract(ws, prob, y, kappa, n_x, sigma, opt.epsilon);
        res.backend = backend->name();
        res.solver_detail = sol.detail;
        if (!have_best || res.margin > best.margin) {
            best = std::move(res);
            have_best = true;
        }
        if (best.feasible) break;
    }
    if (!have_best)
        throw InfeasibleError("no stabilizing certificate found" +
                              (last_detail.empty() ? "" : (": " + last_detail)));
    if (!best.feasible)
        throw InfeasibleError("certificate margin " + std::to_string(best.margin) +
                              " below required " + std::to_string(opt.epsilon));
    return best;
}

/// Rechecks a gain set against the closed-loop stability condition: for every
/// rule vertex the quadratic-form matrix over [x; e] must be negative definite.
inline VerifyReport verify(const std::vector<AgentModel>& agents, const Topology& topology,
                           const std::vector<double>& alpha, const std::vector<double>& beta,
                           int kappa, const std::vector<MemoryGains>& gains, const Mat& P,
                           const std::vector<Mat>& Omega) {
    std::vector<AugmentedModel> models;
    for (const auto& a : agents) models.push_back(augment(a, kappa));
    const GraphMatrices graph = build_graph_matrices(topology);
    const auto blocks = assemble_global(models);
    const int N = static_cast<int>(agents.size());
    const int n = models.front().aug_dim();
    const int D = N * n;
    if (P.rows() != D || P.cols() != D) throw DimensionMismatch("P must be D x D");
    if (static_cast<int>(Omega.size()) != N)
        throw DimensionMismatch("one trigger weight per agent required");

    const Mat CLR = kron(graph.L + graph.R, Mat::Identity(n, n));
    Mat Gamma = Mat::Zero(D, D), Upsilon = Mat::Zero(D, D);
    for (int i = 0; i < N; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (Omega[ui].rows() != n || Omega[ui].cols() != n)
            throw DimensionMismatch("trigger weight must match augmented dimension");
        Gamma.block(i * n, i * n, n, n) = alpha[ui] * (1.0 + beta[ui]) * Omega[ui];
        Upsilon.block(i * n, i * n, n, n) = Omega[ui];
    }
    const Mat LambdaE = CLR.transpose() * Gamma * CLR;

    std::vector<int> p_rules, q_rules;
    for (const auto& a : agents) {
        p_rules.push_back(a.rule_count());
        q_rules.push_back(a.rule_count());
    }

    VerifyReport rep;
    rep.worst_eig = -std::numeric_limits<double>::infinity();
    detail::for_each_vertex(p_rules, q_rules,
                            [&](const std::vector<int>& l, const std::vector<int>& s) {
        const auto [lamA, lamB] = closed_loop_matrix(blocks, graph, gains, l, s);
        Mat theta(2 * D, 2 * D);
        theta.topLeftCorner(D, D) = -P + lamA.transpose() * P * lamA + LambdaE;
        theta.topRightCorner(D, D) = lamA.transpose() * P * lamB + LambdaE;
        theta.bottomLeftCorner(D, D) = lamB.transpose() * P * lamA + LambdaE;
        theta.bottomRightCorner(D, D) = lamB.transpose() * P * lamB + LambdaE - Upsilon;
        theta = 0.5 * (theta + theta.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Mat> es(theta, Eigen::EigenvaluesOnly);
        const double top = es.eigenvalues().maxCoeff();
        if (top > rep.worst_eig) {
            rep.worst_eig = top;
            rep.worst_plant_rule = l;
            rep.worst_ctrl_rule = s;
        }
        ++rep.vertices_checked;
    });
    rep.ok = rep.worst_eig < 0.0;
    return rep;
}

/// Monte-Carlo check of the averaged quadratic-form bound used to pass from
/// the membership-blended closed loop to the vertex family: for PSD Psi and
/// product weights mu on the vertices,
///   (sum mu_v L_v)^T Psi (sum mu_v R_v)  <=  1/2 sum mu_v (L_v^T Psi L_v + R_v^T Psi R_v)
/// as quadratic forms.
inline bool check_lemma1(unsigned seed, int trials = 1000, double tol = 1e-9) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> size_dist(1, 4);
    std::uniform_int_distribution<int> rule_dist(1, 2);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    constexpr int N = 2;
    for (int trial = 0; trial < trials; ++trial) {
        const int d = size_dist(rng);
        Mat G(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) G(i, j) = gauss(rng);
        const Mat Psi = G.transpose() * G;  // PSD by construction

        std::vector<int> p_rules, q_rules;
        for (int i = 0; i < N; ++i) {
            p_rules.push_back(rule_dist(rng));
            q_rules.push_back(rule_dist(rng));
        }
        // simplex weights per agent per family
        auto simplex = [&](int k) {
            Vec w(k);
            double sum = 0.0;
            for (int i = 0; i < k; ++i) {
                w(i) = -std::log(std::max(unif(rng), 1e-300));
                sum += w(i);
            }
            return Vec(w / sum);
        };
        std::vector<Vec> mw, nw;
        for (int i = 0; i < N; ++i) {
            mw.push_back(simplex(p_rules[static_cast<std::size_t>(i)]));
            nw.push_back(simplex(q_rules[static_cast<std::size_t>(i)]));
        }

        Mat lhs_L = Mat::Zero(d, d), lhs_R = Mat::Zero(d, d);
        Mat rhs = Mat::Zero(d, d);
        bool bad = false;
        detail::for_each_vertex(p_rules, q_rules,
                                [&](const std::vector<int>& l, const std::vector<int>& s) {
            double mu = 1.0;
            for (int i = 0; i < N; ++i)
                mu *= mw[static_cast<std::size_t>(i)](l[static_cast<std::size_t>(i)]) *
                      nw[static_cast<std::size_t>(i)](s[static_cast<std::size_t>(i)]);
            Mat Lv(d, d), Rv(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    Lv(i, j) = gauss(rng);
                    Rv(i, j) = gauss(rng);
                }
            lhs_L += mu * Lv;
            lhs_R += mu * Rv;
            rhs += 0.5 * mu * (Lv.transpose() * Psi * Lv + Rv.transpose() * Psi * Rv);
            (void)bad;
        });
        Mat lhs = lhs_L.transpose() * Psi * lhs_R;
        Mat gap = rhs - 0.5 * (lhs + lhs.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (gap + gap.transpose()), Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tol) return false;
    }
    return true;
}

}  // namespace detm
