#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "detm/controller.hpp"
#include "detm/detm.hpp"
#include "detm/errors.hpp"
#include "detm/fuzzy.hpp"
#include "detm/plant.hpp"
#include "detm/synthesis.hpp"
#include "detm/topology.hpp"

namespace detm {

/// Declarative membership family description, reconstructible from config.
struct MembershipSpec {
    std::string type = "sigmoid";  // "sigmoid" | "tabulated"
    int axis = 0;
    double shift = 0.0;
    double band = 0.1;
    std::vector<double> grid;                   // tabulated only
    std::vector<std::vector<double>> lower;     // tabulated only, one row per rule
    std::vector<std::vector<double>> upper;

    IT2MembershipFamily build() const {
        if (type == "sigmoid") return sigmoid_band_family(axis, shift, band);
        if (type == "tabulated") return tabulated_family(axis, grid, lower, upper);
        throw ValidationError("unknown membership type: " + type);
    }

    int rule_count() const { return type == "sigmoid" ? 2 : static_cast<int>(lower.size()); }
};

struct AgentSpec {
    std::vector<FuzzyRule> rules;
    MembershipSpec membership;
    double alpha = 0.0;
    double beta = 0.0;
    double theta = 0.0;
    Mat omega;  // n_x x n_x trigger weight; identity if empty
    Vec x0;
};

struct ScenarioConfig {
    std::string name;
    int kappa = 1;
    double sigma = 1.0;
    int horizon = 100;
    std::string memory_weighting = "geometric";  // "geometric" | "memoryless"
    std::vector<AgentSpec> agents;
    Topology topology;

    int agent_count() const { return static_cast<int>(agents.size()); }

    void validate() const {
        const int N = agent_count();
        if (N == 0) throw ValidationError("scenario needs at least one agent");
        if (kappa < 1) throw ValidationError("kappa must be >= 1");
        if (horizon < 1) throw ValidationError("horizon must be >= 1");
        if (memory_weighting != "geometric" && memory_weighting != "memoryless")
            throw ValidationError("memory_weighting must be 'geometric' or 'memoryless'");
        if (topology.agent_count() != N || topology.a.rows() != N || topology.a.cols() != N)
            throw ValidationError("topology size must match agent count");
        const int n_x = static_cast<int>(agents.front().rules.front().A.rows());
        const int n_u = static_cast<int>(agents.front().rules.front().B.cols());
        for (int i = 0; i < N; ++i) {
            const auto& a = agents[static_cast<std::size_t>(i)];
            const std::string who = "agent " + std::to_string(i);
            if (a.rules.empty()) throw ValidationError(who + ": no rules");
            for (const auto& r : a.rules) {
                if (r.A.rows() != r.A.cols())
                    throw ValidationError(who + ": A must be square");
                if (r.A.rows() != n_x || r.B.rows() != n_x || r.B.cols() != n_u)
                    throw ValidationError(who + ": rule matrix dimensions disagree across agents");
            }
            if (a.membership.rule_count() != static_cast<int>(a.rules.size()))
                throw ValidationError(who + ": membership rule count must match plant rules");
            if (a.x0.size() != n_x) throw ValidationError(who + ": x0 length must equal n_x");
            if (a.alpha < 0.0 || a.beta < 0.0 || a.beta > 1.0 || a.theta < 0.0)
                throw ValidationError(who + ": trigger scalars out of range");
            if (a.omega.size() > 0 && (a.omega.rows() != n_x || a.omega.cols() != n_x))
                throw ValidationError(who + ": omega must be n_x x n_x");
        }
    }

    std::vector<AgentModel> build_agents() const {
        std::vector<AgentModel> out;
        for (const auto& a : agents) {
            AgentModel m;
            m.rules = a.rules;
            m.plant_membership = a.membership.build();
            m.controller_membership = a.membership.build();
            out.push_back(std::move(m));
        }
        return out;
    }

    std::vector<double> alphas() const {
        std::vector<double> v;
        for (const auto& a : agents) v.push_back(a.alpha);
        return v;
    }
    std::vector<double> betas() const {
        std::vector<double> v;
        for (const auto& a : agents) v.push_back(a.beta);
        return v;
    }

    std::vector<DetmParams> build_detm_params() const {
        const int n_x = static_cast<int>(agents.front().rules.front().A.rows());
        const Mat H = memory_weighting == "memoryless" ? memoryless_H(kappa, n_x)
                                                       : geometric_H(kappa, n_x);
        std::vector<DetmParams> out;
        for (const auto& a : agents) {
            DetmParams p;
            p.alpha = a.alpha;
            p.beta = a.beta;
            p.theta = a.theta;
            p.omega = a.omega.size() > 0 ? a.omega : Mat::Identity(n_x, n_x);
            p.H = H;
            p.kappa = kappa;
            p.validate();
            out.push_back(std::move(p));
        }
        return out;
    }

    std::vector<Vec> initial_states() const {
        std::vector<Vec> out;
        for (const auto& a : agents) out.push_back(a.x0);
        return out;
    }
};

// ---- JSON (de)serialization -------------------------------------------------

inline nlohmann::json scenario_to_json(const ScenarioConfig& cfg) {
    nlohmann::json j;
    j["name"] = cfg.name;
    j["kappa"] = cfg.kappa;
    j["sigma"] = cfg.sigma;
    j["horizon"] = cfg.horizon;
    j["memory_weighting"] = cfg.memory_weighting;
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& a : cfg.agents) {
        nlohmann::json ja;
        nlohmann::json rules = nlohmann::json::array();
        for (const auto& r : a.rules)
            rules.push_back({{"A", matrix_to_json(r.A)}, {"B", matrix_to_json(r.B)}});
        ja["rules"] = rules;
        nlohmann::json jm;
        jm["type"] = a.membership.type;
        jm["axis"] = a.membership.axis;
        if (a.membership.type == "sigmoid") {
            jm["shift"] = a.membership.shift;
            jm["band"] = a.membership.band;
        } else {
            jm["grid"] = a.membership.grid;
            jm["lower"] = a.membership.lower;
            jm["upper"] = a.membership.upper;
        }
        ja["membership"] = jm;
        ja["alpha"] = a.alpha;
        ja["beta"] = a.beta;
        ja["theta"] = a.theta;
        if (a.omega.size() > 0) ja["omega"] = matrix_to_json(a.omega);
        nlohmann::json x0 = nlohmann::json::array();
        for (Eigen::Index k = 0; k < a.x0.size(); ++k) x0.push_back(a.x0(k));
        ja["x0"] = x0;
        agents.push_back(std::move(ja));
    }
    j["agents"] = agents;
    j["topology"] = {{"adjacency", matrix_to_json(cfg.topology.a)},
                     {"pinning", nlohmann::json::array()}};
    for (Eigen::Index k = 0; k < cfg.topology.b.size(); ++k)
        j["topology"]["pinning"].push_back(cfg.topology.b(k));
    return j;
}

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
    ScenarioConfig cfg;
    try {
        cfg.name = j.value("name", std::string("unnamed"));
        cfg.kappa = j.value("kappa", 1);
        cfg.sigma = j.value("sigma", 1.0);
        cfg.horizon = j.value("horizon", 100);
        cfg.memory_weighting = j.value("memory_weighting", std::string("geometric"));
        for (const auto& ja : j.at("agents")) {
            AgentSpec a;
            for (const auto& jr : ja.at("rules"))
                a.rules.push_back({matrix_from_json(jr.at("A")), matrix_from_json(jr.at("B"))});
            if (ja.contains("membership")) {
                const auto& jm = ja.at("membership");
                a.membership.type = jm.value("type", std::string("sigmoid"));
                a.membership.axis = jm.value("axis", 0);
                a.membership.shift = jm.value("shift", 0.0);
                a.membership.band = jm.value("band", 0.1);
                if (a.membership.type == "tabulated") {
                    a.membership.grid = jm.at("grid").get<std::vector<double>>();
                    a.membership.lower = jm.at("lower").get<std::vector<std::vector<double>>>();
                    a.membership.upper = jm.at("upper").get<std::vector<std::vector<double>>>();
                }
            }
            a.alpha = ja.value("alpha", 0.0);
            a.beta = ja.value("beta", 0.0);
            a.theta = ja.value("theta", 0.0);
            if (ja.contains("omega")) a.omega = matrix_from_json(ja.at("omega"));
            const auto x0 = ja.at("x0").get<std::vector<double>>();
            a.x0 = Eigen::Map<const Vec>(x0.data(), static_cast<Eigen::Index>(x0.size()));
            cfg.agents.push_back(std::move(a));
        }
        const auto& jt = j.at("topology");
        cfg.topology.a = matrix_from_json(jt.at("adjacency"));
        const auto pin = jt.at("pinning").get<std::vector<double>>();
        cfg.topology.b = Eigen::Map<const Vec>(pin.data(), static_cast<Eigen::Index>(pin.size()));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario parse error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("scenario " + path + ": " + e.what());
    }
    return scenario_from_json(j);
}

inline void save_scenario(const std::string& path, const ScenarioConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open scenario file for writing: " + path);
    out << scenario_to_json(cfg).dump(2) << "\n";
}

// ---- synthesis report -------------------------------------------------------

inline nlohmann::json synthesis_report(const SynthesisResult& res) {
    nlohmann::json j;
    j["feasible"] = res.feasible;
    j["margin"] = res.margin;
    j["sigma"] = res.sigma;
    j["backend"] = res.backend;
    j["solver_detail"] = res.solver_detail;
    j["P"] = matrix_to_json(res.P);
    nlohmann::json om = nlohmann::json::array();
    for (const auto& O : res.Omega) om.push_back(matrix_to_json(O));
    j["trigger_weights"] = om;
    double worst = std::numeric_limits<double>::infinity();
    for (double m : res.vertex_margins) worst = std::min(worst, m);
    j["worst_vertex_margin"] = worst;
    j["vertex_count"] = res.vertex_margins.size();
    return j;
}

inline void save_synthesis_report(const std::string& path, const SynthesisResult& res) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open report file for writing: " + path);
    out << synthesis_report(res).dump(2) << "\n";
}

/// Trigger-weight sidecar: the synthesized full-rank stacked weights that the
/// simulator should use in place of H^T omega H.
inline void save_trigger_weights(const std::string& path, const std::vector<Mat>& weights) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& w : weights) j.push_back(matrix_to_json(w));
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open trigger weight file for writing: " + path);
    out << j.dump(2) << "\n";
}

inline std::vector<Mat> load_trigger_weights(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open trigger weight file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("trigger weight parse error: ") + e.what());
    }
    std::vector<Mat> out;
    for (const auto& jm : j) out.push_back(matrix_from_json(jm));
    return out;
}

}  // namespace detm
