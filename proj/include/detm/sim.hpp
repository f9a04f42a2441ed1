#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "detm/controller.hpp"
#include "detm/detm.hpp"
#include "detm/errors.hpp"
#include "detm/plant.hpp"
#include "detm/topology.hpp"

namespace detm {

struct SimConfig {
    int horizon = 100;
    std::vector<Vec> x0;
    bool lyapunov = false;      // requires P
    Mat P;                      // D x D, optional
    double divergence_guard = 1e12;
    double settling_threshold = 1e-2;
};

struct TriggerRecord {
    int t = 0;
    int agent = 0;
    bool triggered = false;
    double lhs = 0.0;
    double rhs = 0.0;
    double delta_threshold = 0.0;
};

struct SimTrace {
    std::vector<std::vector<Vec>> states;  // [t][agent], t = 0..T
    std::vector<std::vector<Vec>> inputs;  // [t][agent], t = 0..T-1
    std::vector<std::vector<int>> trigger_log;  // per agent, trigger times
    std::vector<TriggerRecord> trigger_records;
    Eigen::VectorXd trs;                   // per-agent triggered rate
    std::vector<double> consensus_error;   // max pairwise distance, t = 0..T
    std::vector<double> lyapunov;          // V(t), t = 0..T (optional)

    int horizon() const { return static_cast<int>(inputs.size()); }
};

namespace detail {

inline double consensus_error_at(const std::vector<Vec>& xs) {
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = i + 1; j < xs.size(); ++j)
            worst = std::max(worst, (xs[i] - xs[j]).norm());
    return worst;
}

/// Augmented global state [x_i(t-kappa+1); ...; x_i(t)] per agent, stacked,
/// with initial-state padding for t-h < 0.
inline Vec augmented_state(const std::vector<std::vector<Vec>>& states, int t, int kappa) {
    const int N = static_cast<int>(states.front().size());
    const int n_x = static_cast<int>(states.front().front().size());
    Vec out(static_cast<Eigen::Index>(N) * kappa * n_x);
    Eigen::Index at = 0;
    for (int i = 0; i < N; ++i) {
        for (int h = kappa - 1; h >= 0; --h) {
            const int tau = std::max(0, t - h);
            out.segment(at, n_x) = states[static_cast<std::size_t>(tau)][static_cast<std::size_t>(i)];
            at += n_x;
        }
    }
    return out;
}

}  // namespace detail

inline SimTrace run(const std::vector<AgentModel>& agents, const GraphMatrices& graph,
                    const std::vector<MemoryGains>& gains, const std::vector<DetmParams>& params,
                    const SimConfig& cfg) {
    const int N = static_cast<int>(agents.size());
    if (static_cast<int>(gains.size()) != N || static_cast<int>(params.size()) != N ||
        static_cast<int>(cfg.x0.size()) != N)
        throw DimensionMismatch("agents, gains, detm params and initial states must align");
    if (cfg.horizon < 1) throw ValidationError("horizon must be >= 1");
    const int kappa = params.front().kappa;
    for (const auto& p : params)
        if (p.kappa != kappa) throw HeterogeneousDims("all agents must share kappa");

    std::vector<Vec> x = cfg.x0;
    std::vector<Vec> broadcasts = cfg.x0;
    std::vector<DetmState> st;
    for (int i = 0; i < N; ++i)
        st.push_back(init_detm_state(params[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(i)],
                                     combined_measurement(graph, broadcasts, i)));

    SimTrace trace;
    trace.states.push_back(x);
    trace.consensus_error.push_back(detail::consensus_error_at(x));

    for (int t = 0; t < cfg.horizon; ++t) {
        // (1)-(2): trigger decisions on the previous broadcast snapshot, then
        // commits, then delta refreshes (t = 0 already triggered at init).
        if (t > 0) {
            std::vector<bool> fired(static_cast<std::size_t>(N), false);
            for (int i = 0; i < N; ++i) {
                const auto ui = static_cast<std::size_t>(i);
                const auto& p = params[ui];
                // record the comparison before mutating state
                TriggerRecord rec;
                rec.t = t;
                rec.agent = i;
                {
                    const Vec e = st[ui].last_broadcast - x[ui];
                    std::deque<Vec> ring(st[ui].e_history);
                    ring.pop_front();
                    ring.push_back(e);
                    const Mat W = p.stacked_weight();
                    const Vec es = stack_history(ring);
                    const Vec ds = stack_history(st[ui].delta_history);
                    rec.lhs = es.dot(W * es);
                    rec.delta_threshold = dynamic_threshold(p, e);
                    rec.rhs = rec.delta_threshold * ds.dot(W * ds);
                }
                fired[ui] = detm_decide(p, st[ui], x[ui]);
                rec.triggered = fired[ui];
                trace.trigger_records.push_back(rec);
            }
            for (int i = 0; i < N; ++i)
                if (fired[static_cast<std::size_t>(i)])
                    detm_commit(st[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(i)],
                                broadcasts, i, t);
            for (int i = 0; i < N; ++i)
                if (fired[static_cast<std::size_t>(i)])
                    detm_refresh_delta(st[static_cast<std::size_t>(i)], graph, broadcasts, i);
        }

        // (3) controllers from frozen delta stacks
        std::vector<Vec> u(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const MembershipVector m =
                normalized_membership(agents[ui].controller_membership, x[ui]);
            u[ui] = control_input(gains[ui], m, stack_history(st[ui].delta_history));
        }
        trace.inputs.push_back(u);

        // (4) plants advance
        for (int i = 0; i < N; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            x[ui] = step_agent(agents[ui], x[ui], u[ui]);
            if (!x[ui].allFinite() || x[ui].lpNorm<Eigen::Infinity>() > cfg.divergence_guard)
                throw std::runtime_error("simulation diverged at t=" + std::to_string(t + 1) +
                                         " agent=" + std::to_string(i));
        }
        trace.states.push_back(x);
        trace.consensus_error.push_back(detail::consensus_error_at(x));
    }

    trace.trs.resize(N);
    for (int i = 0; i < N; ++i) {
        trace.trs(i) = triggered_rate(st[static_cast<std::size_t>(i)]);
        trace.trigger_log.push_back(st[static_cast<std::size_t>(i)].trigger_log);
    }
    if (cfg.lyapunov) {
        if (cfg.P.size() == 0) throw MissingP("lyapunov trace requested without P");
        for (int t = 0; t <= cfg.horizon; ++t) {
            const Vec xa = detail::augmented_state(trace.states, t, kappa);
            trace.lyapunov.push_back(xa.dot(cfg.P * xa));
        }
    }
    return trace;
}

/// V(t) = x_aug(t)^T P x_aug(t) over a recorded trace.
inline std::vector<double> lyapunov_trace(const SimTrace& trace, const Mat& P, int kappa) {
    if (P.size() == 0) throw MissingP("lyapunov_trace needs P");
    std::vector<double> v;
    for (std::size_t t = 0; t < trace.states.size(); ++t) {
        const Vec xa = detail::augmented_state(trace.states, static_cast<int>(t), kappa);
        if (xa.size() != P.rows())
            throw DimensionMismatch("P size does not match augmented state");
        v.push_back(xa.dot(P * xa));
    }
    return v;
}

struct CompareRow {
    std::string name;
    Eigen::VectorXd trs;
    int settling_step = -1;  // first t with max_i |x_i| < threshold, -1 if never
    double consensus_at_horizon = 0.0;
    bool stable = true;
};

inline CompareRow summarize_run(const std::string& name, const SimTrace& trace,
                                double settling_threshold) {
    CompareRow row;
    row.name = name;
    row.trs = trace.trs;
    row.consensus_at_horizon = trace.consensus_error.back();
    for (std::size_t t = 0; t < trace.states.size(); ++t) {
        double worst = 0.0;
        for (const auto& xi : trace.states[t]) worst = std::max(worst, xi.norm());
        if (worst < settling_threshold) {
            row.settling_step = static_cast<int>(t);
            break;
        }
    }
    return row;
}

inline std::vector<CompareRow> compare_mechanisms(
    const std::vector<AgentModel>& agents, const GraphMatrices& graph,
    const std::vector<MemoryGains>& gains,
    const std::vector<std::pair<std::string, std::vector<DetmParams>>>& variants,
    const SimConfig& cfg) {
    std::vector<CompareRow> rows;
    for (const auto& [name, params] : variants) {
        try {
            const SimTrace trace = run(agents, graph, gains, params, cfg);
            rows.push_back(summarize_run(name, trace, cfg.settling_threshold));
        } catch (const std::runtime_error&) {
            CompareRow row;
            row.name = name;
            row.stable = false;
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace detm
