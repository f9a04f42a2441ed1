#pragma once

#include <deque>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "detm/errors.hpp"
#include "detm/fuzzy.hpp"

namespace detm {

inline Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Per-rule stacked memory gains K_tilde = [K^(kappa) ... K^(2) K^(1)],
/// most recent block rightmost.
struct MemoryGains {
    std::vector<Mat> stacked;  // one n_u x (kappa n_x) matrix per controller rule
    int kappa = 1;
    int n_x = 0;

    int rule_count() const { return static_cast<int>(stacked.size()); }
    int input_dim() const { return static_cast<int>(stacked.front().rows()); }

    /// h-th history block (h = 1 is most recent).
    Eigen::Block<const Mat> block(int rule, int h) const {
        const Mat& K = stacked[static_cast<std::size_t>(rule)];
        return K.block(0, (kappa - h) * n_x, K.rows(), n_x);
    }
};

/// Concatenates a ring of kappa vectors, oldest first.
inline Vec stack_history(const std::deque<Vec>& ring) {
    if (ring.empty()) throw DimensionMismatch("empty history ring");
    const Eigen::Index n = ring.front().size();
    Vec out(static_cast<Eigen::Index>(ring.size()) * n);
    Eigen::Index at = 0;
    for (const auto& v : ring) {
        out.segment(at, n) = v;
        at += n;
    }
    return out;
}

inline Vec control_input(const MemoryGains& gains, const MembershipVector& membership,
                         const Vec& delta_stack) {
    if (gains.rule_count() != static_cast<int>(membership.size()))
        throw DimensionMismatch("controller membership size must match rule count");
    if (delta_stack.size() != gains.stacked.front().cols())
        throw DimensionMismatch("history stack length must equal kappa*n_x");
    Vec u = Vec::Zero(gains.input_dim());
    for (int s = 0; s < gains.rule_count(); ++s)
        u += membership[static_cast<std::size_t>(s)] * (gains.stacked[static_cast<std::size_t>(s)] * delta_stack);
    return u;
}

// ---- gain file (JSON) -------------------------------------------------------

inline nlohmann::json matrix_to_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

inline Mat matrix_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty()) throw ParseError("expected a non-empty matrix array");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols)
            throw ParseError("ragged matrix rows");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

inline void save_gains(const std::string& path, const std::vector<MemoryGains>& gains) {
    nlohmann::json j;
    j["kappa"] = gains.front().kappa;
    j["n_x"] = gains.front().n_x;
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& g : gains) {
        nlohmann::json rules = nlohmann::json::array();
        for (const auto& K : g.stacked) rules.push_back(matrix_to_json(K));
        agents.push_back({{"rules", rules}});
    }
    j["agents"] = agents;
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open gain file for writing: " + path);
    out << j.dump(2) << "\n";
}

inline std::vector<MemoryGains> load_gains(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open gain file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("gain file parse error: ") + e.what());
    }
    std::vector<MemoryGains> gains;
    const int kappa = j.at("kappa").get<int>();
    const int n_x = j.at("n_x").get<int>();
    for (const auto& agent : j.at("agents")) {
        MemoryGains g;
        g.kappa = kappa;
        g.n_x = n_x;
        for (const auto& rule : agent.at("rules")) {
            Mat K = matrix_from_json(rule);
            if (K.cols() != static_cast<Eigen::Index>(kappa) * n_x)
                throw ValidationError("gain matrix width must be kappa*n_x");
            g.stacked.push_back(std::move(K));
        }
        gains.push_back(std::move(g));
    }
    return gains;
}

}  // namespace detm
