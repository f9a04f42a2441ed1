#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "detm/affine.hpp"
#include "detm/errors.hpp"

namespace detm {

struct SparseEntry {
    int r = 0;
    int c = 0;
    double v = 0.0;
};

/// One constraint F(y) = const + sum_k y_k coeff_k, required PSD (>= margin).
struct AffineConstraint {
    int dim = 0;
    std::vector<SparseEntry> constant;
    std::vector<std::pair<int, std::vector<SparseEntry>>> terms;

    static AffineConstraint from_affine(const AffineMat& a) {
        if (a.rows() != a.cols()) throw DimensionMismatch("PSD constraint must be square");
        AffineConstraint c;
        c.dim = static_cast<int>(a.rows());
        auto sparsify = [](const Eigen::MatrixXd& m) {
            std::vector<SparseEntry> out;
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                for (Eigen::Index i = 0; i < m.rows(); ++i)
                    if (m(i, j) != 0.0)
                        out.push_back({static_cast<int>(i), static_cast<int>(j), m(i, j)});
            return out;
        };
        c.constant = sparsify(a.constant_part());
        for (const auto& [k, v] : a.terms()) {
            auto entries = sparsify(v);
            if (!entries.empty()) c.terms.emplace_back(k, std::move(entries));
        }
        return c;
    }

    Eigen::MatrixXd eval(const Eigen::VectorXd& y) const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
        for (const auto& e : constant) m(e.r, e.c) += e.v;
        for (const auto& [k, entries] : terms)
            for (const auto& e : entries) m(e.r, e.c) += y(k) * e.v;
        return m;
    }
};

/// Feasibility-with-margin problem: find y with F_j(y) >= t I for all j,
/// |y| bounded, t as large as possible.
struct SdpProblem {
    int num_vars = 0;
    std::vector<AffineConstraint> constraints;
    double var_bound = 1e4;
    double margin_cap = 10.0;
    double solver_eps = 1e-5;
    int max_iters = 6000;
};

struct SdpSolution {
    enum class Status { Candidate, Infeasible, Failure };
    Status status = Status::Failure;
    Eigen::VectorXd y;
    double solver_margin = 0.0;
    std::string detail;
};

/// Smallest eigenvalue of any constraint at y: the certified margin.
inline double true_margin(const SdpProblem& problem, const Eigen::VectorXd& y) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& c : problem.constraints) {
        Eigen::MatrixXd m = c.eval(y);
        m = 0.5 * (m + m.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        worst = std::min(worst, es.eigenvalues().minCoeff());
    }
    return worst;
}

class SdpBackend {
  public:
    virtual ~SdpBackend() = default;
    virtual SdpSolution solve(const SdpProblem& problem) = 0;
    virtual std::string name() const = 0;
};

// ---- native alternating-projection backend ---------------------------------

/// Alternating projection between the affine image {F_j(y)} and the product of
/// margin-shifted PSD cones. Suitable for small problems and for polishing a
/// warm start from another backend.
class ProjectionBackend : public SdpBackend {
  public:
    explicit ProjectionBackend(double target_margin = 1e-4, int max_iters = 4000)
        : target_margin_(target_margin), max_iters_(max_iters) {}

    std::string name() const override { return "projection"; }

    SdpSolution solve(const SdpProblem& problem) override {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(problem.num_vars);
        return refine(problem, y, target_margin_, max_iters_);
    }

    /// Projects from y0 toward margin >= tau; returns the best iterate.
    static SdpSolution refine(const SdpProblem& problem, const Eigen::VectorXd& y0, double tau,
                              int max_iters) {
        const int m = problem.num_vars;
        const auto& cons = problem.constraints;

        // Gram matrix of the affine map, shared by all least-squares solves.
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
        for (const auto& c : cons) {
            std::map<long, std::vector<std::pair<int, double>>> per_entry;
            for (std::size_t k = 0; k < c.terms.size(); ++k)
                for (const auto& e : c.terms[k].second)
                    per_entry[static_cast<long>(e.r) + static_cast<long>(e.c) * c.dim].emplace_back(
                        c.terms[k].first, e.v);
            for (const auto& [pos, list] : per_entry)
                for (const auto& [k1, v1] : list)
                    for (const auto& [k2, v2] : list) G(k1, k2) += v1 * v2;
        }
        G.diagonal().array() += 1e-12;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(G);

        Eigen::VectorXd y = y0;
        Eigen::VectorXd best_y = y;
        double best_margin = true_margin(problem, y);
        for (int it = 0; it < max_iters; ++it) {
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
            double margin = std::numeric_limits<double>::infinity();
            for (const auto& c : cons) {
                Eigen::MatrixXd F = c.eval(y);
                F = 0.5 * (F + F.transpose()).eval();
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F);
                margin = std::min(margin, es.eigenvalues().minCoeff());
                Eigen::VectorXd lam = es.eigenvalues().cwiseMax(tau);
                Eigen::MatrixXd Z =
                    es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
                // accumulate A^T (Z - C)
                Eigen::MatrixXd resid = Z;
                for (const auto& e : c.constant) resid(e.r, e.c) -= e.v;
                for (const auto& [k, entries] : c.terms)
                    for (const auto& e : entries) rhs(k) += e.v * resid(e.r, e.c);
            }
            if (margin > best_margin) {
                best_margin = margin;
                best_y = y;
            }
            if (margin >= tau) break;
            y = ldlt.solve(rhs);
        }
        SdpSolution sol;
        sol.y = best_y;
        sol.solver_margin = best_margin;
        sol.status = best_margin > 0.0 ? SdpSolution::Status::Candidate
                                       : SdpSolution::Status::Infeasible;
        return sol;
    }

  private:
    double target_margin_;
    int max_iters_;
};

// ---- external conic solver via subprocess ----------------------------------

namespace detail {

inline const char* kScsBridge = R"PY(
import json, sys
import numpy as np
import scipy.sparse as sp
import scs

with open(sys.argv[1]) as f:
    prob = json.load(f)
nvar = prob["num_vars"]
nv = nvar + 1
tcol = nvar
rows = []; cols = []; vals = []; bvals = []
r = 0
bound = prob["var_bound"]
for k in range(nvar):
    rows.append(r); cols.append(k); vals.append(1.0); bvals.append(bound); r += 1
    rows.append(r); cols.append(k); vals.append(-1.0); bvals.append(bound); r += 1
rows.append(r); cols.append(tcol); vals.append(1.0); bvals.append(prob["margin_cap"]); r += 1
cone_l = r
cone_s = []
for con in prob["constraints"]:
    kdim = con["dim"]
    cone_s.append(kdim)
    lut = {}
    mlin = 0
    for j in range(kdim):
        for i in range(j, kdim):
            lut[i + j * kdim] = (mlin, 1.0 if i == j else np.sqrt(2.0))
            mlin += 1
    def emit(col, entries):
        for e in entries:
            got = lut.get(e[0] + e[1] * kdim)
            if got is None:
                continue
            mrow, s0 = got
            rows.append(r + mrow); cols.append(col); vals.append(-s0 * e[2])
    for term in con["terms"]:
        emit(term[0], term[1])
    base = np.zeros(mlin)
    for e in con["const"]:
        got = lut.get(e[0] + e[1] * kdim)
        if got is not None:
            base[got[0]] += got[1] * e[2]
    for j in range(kdim):
        got = lut[j + j * kdim]
        rows.append(r + got[0]); cols.append(tcol); vals.append(1.0)
    for mrow in range(mlin):
        bvals.append(base[mrow])
    r += mlin
A = sp.csc_matrix(sp.coo_matrix((vals, (rows, cols)), shape=(r, nv)))
b = np.array(bvals)
c = np.zeros(nv); c[tcol] = -1.0
solver = scs.SCS(dict(A=A, b=b, c=c), dict(l=cone_l, s=cone_s),
                 eps_abs=prob["solver_eps"], eps_rel=prob["solver_eps"],
                 max_iters=prob["max_iters"], verbose=False)
sol = solver.solve()
out = {"status": sol["info"]["status"], "t": float(sol["x"][tcol]),
       "y": [float(v) for v in sol["x"][:nvar]]}
with open(sys.argv[2], "w") as f:
    json.dump(out, f)
)PY";

inline std::string make_temp_dir() {
    char templ[] = "/tmp/detm_sdp_XXXXXX";
    char* dir = mkdtemp(templ);
    if (!dir) throw BackendFailure("cannot create temp dir for solver bridge");
    return std::string(dir);
}

}  // namespace detail

/// Bridges to the SCS conic solver through a generated python script.
class ScsSubprocessBackend : public SdpBackend {
  public:
    std::string name() const override { return "scs"; }

    SdpSolution solve(const SdpProblem& problem) override {
        const std::string dir = detail::make_temp_dir();
        const std::string prob_path = dir + "/problem.json";
        const std::string sol_path = dir + "/solution.json";
        const std::string script_path = dir + "/bridge.py";
        {
            std::ofstream script(script_path);
            script << detail::kScsBridge;
        }
        {
            nlohmann::json j;
            j["num_vars"] = problem.num_vars;
            j["var_bound"] = problem.var_bound;
            j["margin_cap"] = problem.margin_cap;
            j["solver_eps"] = problem.solver_eps;
            j["max_iters"] = problem.max_iters;
            nlohmann::json cons = nlohmann::json::array();
            for (const auto& c : problem.constraints) {
                nlohmann::json jc;
                jc["dim"] = c.dim;
                nlohmann::json cst = nlohmann::json::array();
                for (const auto& e : c.constant) cst.push_back({e.r, e.c, e.v});
                jc["const"] = cst;
                nlohmann::json terms = nlohmann::json::array();
                for (const auto& [k, entries] : c.terms) {
                    nlohmann::json je = nlohmann::json::array();
                    for (const auto& e : entries) je.push_back({e.r, e.c, e.v});
                    terms.push_back({k, je});
                }
                jc["terms"] = terms;
                cons.push_back(std::move(jc));
            }
            j["constraints"] = std::move(cons);
            std::ofstream out(prob_path);
            out << j.dump();
        }
        const std::string cmd = "python3 " + script_path + " " + prob_path + " " + sol_path +
                                " > " + dir + "/log.txt 2>&1";
        const int rc = std::system(cmd.c_str());
        SdpSolution sol;
        if (rc != 0) {
            sol.status = SdpSolution::Status::Failure;
            sol.detail = "scs bridge exited with code " + std::to_string(rc);
            return sol;
        }
        std::ifstream in(sol_path);
        if (!in) {
            sol.status = SdpSolution::Status::Failure;
            sol.detail = "scs bridge produced no solution file";
            return sol;
        }
        nlohmann::json j;
        in >> j;
        const std::string status = j.at("status").get<std::string>();
        sol.solver_margin = j.at("t").get<double>();
        const auto& yj = j.at("y");
        sol.y.resize(static_cast<Eigen::Index>(yj.size()));
        for (Eigen::Index k = 0; k < sol.y.size(); ++k)
            sol.y(k) = yj[static_cast<std::size_t>(k)].get<double>();
        if (status.rfind("solved", 0) == 0)
            sol.status = SdpSolution::Status::Candidate;
        else if (status.find("infeasible") != std::string::npos)
            sol.status = SdpSolution::Status::Infeasible;
        else
            sol.status = SdpSolution::Status::Candidate;  // inaccurate: let the margin check decide
        sol.detail = status;
        return sol;
    }
};

inline std::unique_ptr<SdpBackend> make_backend(std::string name = {}) {
    if (name.empty()) {
        if (const char* env = std::getenv("DETM_SDP_BACKEND")) name = env;
    }
    if (name.empty()) name = "scs";
    if (name == "scs") return std::make_unique<ScsSubprocessBackend>();
    if (name == "projection") return std::make_unique<ProjectionBackend>();
    throw BackendFailure("unknown SDP backend: " + name);
}

}  // namespace detm
