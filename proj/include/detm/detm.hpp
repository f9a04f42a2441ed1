#pragma once

#include <cmath>
#include <deque>
#include <vector>

#include <Eigen/Dense>

#include "detm/controller.hpp"
#include "detm/errors.hpp"
#include "detm/topology.hpp"

namespace detm {

/// H = [0 ... 0 I]: the trigger looks only at the most recent sample.
inline Mat memoryless_H(int kappa, int n_x) {
    Mat H = Mat::Zero(n_x, kappa * n_x);
    H.block(0, (kappa - 1) * n_x, n_x, n_x) = Mat::Identity(n_x, n_x);
    return H;
}

/// H = [H_kappa ... H_1] with H_h = 2^(1-h) I, most recent block heaviest.
inline Mat geometric_H(int kappa, int n_x) {
    Mat H = Mat::Zero(n_x, kappa * n_x);
    for (int h = 1; h <= kappa; ++h)
        H.block(0, (kappa - h) * n_x, n_x, n_x) =
            std::ldexp(1.0, 1 - h) * Mat::Identity(n_x, n_x);
    return H;
}

struct DetmParams {
    double alpha = 0.0;  // base threshold, >= 0
    double beta = 0.0;   // modulation, in [0,1]
    double theta = 0.0;  // error-energy pivot
    Mat omega;           // n_x x n_x, symmetric positive definite
    Mat H;               // n_x x (kappa n_x) memory weighting
    int kappa = 1;

    /// Quadratic weight on stacked histories: H^T Omega H, (kappa n_x)^2.
    /// A full-rank kappa-expanded weight (from synthesis) may override it.
    Mat stacked_weight() const {
        if (weight_override.size() > 0) return weight_override;
        return H.transpose() * omega * H;
    }

    Mat weight_override;  // optional (kappa n_x) x (kappa n_x) weight

    void validate() const {
        if (alpha < 0.0 || beta < 0.0 || beta > 1.0 || theta < 0.0)
            throw ValidationError("detm scalars out of range (alpha>=0, beta in [0,1], theta>=0)");
        if (omega.rows() != omega.cols())
            throw ValidationError("omega must be square");
        Eigen::SelfAdjointEigenSolver<Mat> es(omega);
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw ValidationError("omega must be positive definite");
        const int n_x = static_cast<int>(omega.rows());
        if (H.rows() != n_x || H.cols() != static_cast<Eigen::Index>(kappa) * n_x)
            throw ValidationError("H must be n_x x (kappa n_x)");
        // newer history blocks may not be down-weighted below older ones
        for (int h = 1; h + 1 <= kappa; ++h) {
            const Mat newer = H.block(0, (kappa - h) * n_x, n_x, n_x);
            const Mat older = H.block(0, (kappa - h - 1) * n_x, n_x, n_x);
            if (((older.array() - newer.array()) > 1e-12).any())
                throw ValidationError("H blocks must be elementwise nonincreasing into the past");
        }
    }
};

/// Per-agent trigger bookkeeping. Rings are oldest-first with kappa entries.
struct DetmState {
    Vec last_broadcast;
    Vec error;                    // e(t) = last_broadcast - x(t)
    std::deque<Vec> e_history;    // errors e(t-kappa+1) .. e(t)
    std::deque<Vec> delta_history;  // combined measurements at the last kappa triggers
    std::vector<int> trigger_log;
    long trigger_count = 0;
    long step_count = 0;
};

inline double dynamic_threshold(const DetmParams& params, const Vec& e) {
    return params.alpha * (1.0 - params.beta * std::tanh(e.dot(e) - params.theta));
}

/// delta_i = sum_j a_ij (xhat_i - xhat_j) + b_i xhat_i over broadcast values;
/// equivalently row i of (L + R) applied to the broadcast table.
inline Vec combined_measurement(const GraphMatrices& graph, const std::vector<Vec>& broadcasts,
                                int i) {
    const int N = graph.agent_count();
    Vec delta = Vec::Zero(broadcasts.front().size());
    for (int j = 0; j < N; ++j)
        delta += (graph.L(i, j) + graph.R(i, j)) * broadcasts[static_cast<std::size_t>(j)];
    return delta;
}

/// Seeds the trigger state at t0: broadcast the initial state, log the t0
/// trigger, and pre-fill both rings (errors with zeros, deltas with delta(t0)).
inline DetmState init_detm_state(const DetmParams& params, const Vec& x0, const Vec& delta0) {
    DetmState st;
    st.last_broadcast = x0;
    st.error = Vec::Zero(x0.size());
    for (int h = 0; h < params.kappa; ++h) {
        st.e_history.push_back(Vec::Zero(x0.size()));
        st.delta_history.push_back(delta0);
    }
    st.trigger_log.push_back(0);
    st.trigger_count = 1;
    st.step_count = 1;
    return st;
}

/// Memory trigger test against the frozen delta history. Ties trigger, except
/// the all-zero case (equilibrium with empty error stack stays silent).
inline bool should_trigger(const DetmParams& params, const DetmState& state, const Vec& x_now) {
    const Vec e = state.last_broadcast - x_now;
    std::deque<Vec> ring(state.e_history);
    ring.pop_front();
    ring.push_back(e);
    const Vec e_stack = stack_history(ring);
    const Vec d_stack = stack_history(state.delta_history);
    const Mat W = params.stacked_weight();
    const double lhs = e_stack.dot(W * e_stack);
    const double rhs = dynamic_threshold(params, e) * d_stack.dot(W * d_stack);
    return lhs >= rhs && lhs > 0.0;
}

/// Decision phase: refresh the error bookkeeping for time t and report whether
/// the agent fires. Reads only local state, so decisions are snapshot-safe.
inline bool detm_decide(const DetmParams& params, DetmState& state, const Vec& x_now) {
    const bool triggered = should_trigger(params, state, x_now);
    state.error = state.last_broadcast - x_now;
    state.e_history.pop_front();
    state.e_history.push_back(state.error);
    state.step_count += 1;
    return triggered;
}

/// Commit phase for a fired agent: publish the broadcast and zero the error.
inline void detm_commit(DetmState& state, const Vec& x_now, std::vector<Vec>& broadcasts,
                        int agent, int t) {
    state.last_broadcast = x_now;
    state.error.setZero();
    state.e_history.back().setZero();
    broadcasts[static_cast<std::size_t>(agent)] = x_now;
    state.trigger_log.push_back(t);
    state.trigger_count += 1;
}

/// Refresh phase: push the post-commit combined measurement into the ring.
inline void detm_refresh_delta(DetmState& state, const GraphMatrices& graph,
                               const std::vector<Vec>& broadcasts, int agent) {
    state.delta_history.pop_front();
    state.delta_history.push_back(combined_measurement(graph, broadcasts, agent));
}

/// One full DETM step for a single agent: decide, and on a trigger commit the
/// broadcast and recompute delta from the updated table. The simulator runs
/// the three phases across all agents instead, so commits cannot leak into
/// same-step decisions.
inline bool on_step(const DetmParams& params, DetmState& state, const Vec& x_now,
                    std::vector<Vec>& broadcasts, const GraphMatrices& graph, int agent, int t) {
    const bool triggered = detm_decide(params, state, x_now);
    if (triggered) {
        detm_commit(state, x_now, broadcasts, agent, t);
        detm_refresh_delta(state, graph, broadcasts, agent);
    }
    return triggered;
}

inline double triggered_rate(const DetmState& state) {
    if (state.step_count <= 0) throw ValidationError("triggered_rate needs at least one step");
    return static_cast<double>(state.trigger_count) / static_cast<double>(state.step_count);
}

}  // namespace detm
