// Command-line workbench: synthesize event-triggered memory controllers for
// fuzzy multi-agent systems, simulate the closed loop, verify gain sets, and
// compare trigger-mechanism variants.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "detm/scenario.hpp"
#include "detm/sim.hpp"
#include "detm/synthesis.hpp"

namespace fs = std::filesystem;
using namespace detm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 1;
constexpr int kExitConfig = 2;

void write_states_csv(const std::string& path, const SimTrace& trace) {
    std::ofstream out(path);
    const auto& first = trace.states.front();
    out << "t";
    for (std::size_t i = 0; i < first.size(); ++i)
        for (Eigen::Index d = 0; d < first[i].size(); ++d) out << ",x" << i << "_" << d;
    out << "\n";
    for (std::size_t t = 0; t < trace.states.size(); ++t) {
        out << t;
        for (const auto& xi : trace.states[t])
            for (Eigen::Index d = 0; d < xi.size(); ++d) out << "," << xi(d);
        out << "\n";
    }
}

void write_inputs_csv(const std::string& path, const SimTrace& trace) {
    std::ofstream out(path);
    const auto& first = trace.inputs.front();
    out << "t";
    for (std::size_t i = 0; i < first.size(); ++i)
        for (Eigen::Index d = 0; d < first[i].size(); ++d) out << ",u" << i << "_" << d;
    out << "\n";
    for (std::size_t t = 0; t < trace.inputs.size(); ++t) {
        out << t;
        for (const auto& ui : trace.inputs[t])
            for (Eigen::Index d = 0; d < ui.size(); ++d) out << "," << ui(d);
        out << "\n";
    }
}

void write_triggers_csv(const std::string& path, const SimTrace& trace) {
    std::ofstream out(path);
    out << "t,agent,triggered,lhs,rhs,threshold\n";
    for (const auto& r : trace.trigger_records)
        out << r.t << "," << r.agent << "," << (r.triggered ? 1 : 0) << "," << r.lhs << ","
            << r.rhs << "," << r.delta_threshold << "\n";
}

void write_metrics_csv(const std::string& path, const SimTrace& trace) {
    std::ofstream out(path);
    out << "metric,agent,value\n";
    for (Eigen::Index i = 0; i < trace.trs.size(); ++i)
        out << "trs," << i << "," << trace.trs(i) << "\n";
    out << "trs_mean,," << trace.trs.mean() << "\n";
    out << "consensus_final,," << trace.consensus_error.back() << "\n";
    double worst = 0.0;
    for (const auto& xi : trace.states.back()) worst = std::max(worst, xi.norm());
    out << "state_norm_final,," << worst << "\n";
}

void write_plot_script(const std::string& path) {
    std::ofstream out(path);
    out << R"PY(#!/usr/bin/env python3
"""Plots simulation traces emitted next to this script."""
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))

def load(name):
    with open(os.path.join(here, name)) as f:
        rows = list(csv.reader(f))
    return rows[0], [[float(v) if v else 0.0 for v in r] for r in rows[1:]]

hdr, rows = load("states.csv")
t = [r[0] for r in rows]
plt.figure(figsize=(8, 4))
for c, name in enumerate(hdr[1:], start=1):
    plt.plot(t, [r[c] for r in rows], label=name, lw=0.9)
plt.xlabel("step"); plt.ylabel("state"); plt.legend(ncol=4, fontsize=7)
plt.tight_layout(); plt.savefig(os.path.join(here, "states.png"), dpi=150)

hdr, rows = load("triggers.csv")
plt.figure(figsize=(8, 2.5))
fired = [(r[0], r[1]) for r in rows if r[2] > 0]
plt.scatter([f[0] for f in fired], [f[1] for f in fired], marker="|", s=80)
plt.xlabel("step"); plt.ylabel("agent"); plt.yticks(sorted({f[1] for f in fired}))
plt.tight_layout(); plt.savefig(os.path.join(here, "triggers.png"), dpi=150)
print("wrote states.png and triggers.png")
)PY";
}

struct CommonArgs {
    std::string scenario;
    std::string gains;
    std::string weights;
    std::string report;
    std::string out = "out";
    double sigma = 0.0;  // 0: take from scenario
    int horizon = 0;     // 0: take from scenario
    double epsilon = 1e-6;
    unsigned seed = 1;
};

SimTrace simulate_scenario(const ScenarioConfig& cfg, const std::vector<MemoryGains>& gains,
                           const std::vector<Mat>& weights, int horizon) {
    auto agents = cfg.build_agents();
    auto graph = build_graph_matrices(cfg.topology);
    auto params = cfg.build_detm_params();
    if (!weights.empty()) {
        if (weights.size() != params.size())
            throw ValidationError("trigger weight count must match agent count");
        for (std::size_t i = 0; i < params.size(); ++i)
            params[i].weight_override = weights[i];
    }
    SimConfig sim_cfg;
    sim_cfg.horizon = horizon;
    sim_cfg.x0 = cfg.initial_states();
    return run(agents, graph, gains, params, sim_cfg);
}

int cmd_synth(const CommonArgs& args) {
    ScenarioConfig cfg = load_scenario(args.scenario);
    SynthesisOptions opt;
    opt.sigma = args.sigma > 0.0 ? args.sigma : cfg.sigma;
    opt.sigma_grid = {0.01, 0.1, 1.0, 10.0, 100.0};
    opt.epsilon = args.epsilon;
    fs::create_directories(args.out);
    try {
        SynthesisResult res = solve(cfg.build_agents(), cfg.topology, cfg.alphas(), cfg.betas(),
                                    cfg.kappa, opt);
        save_gains(args.out + "/gains.json", res.gains);
        save_trigger_weights(args.out + "/trigger_weights.json", res.Omega);
        save_synthesis_report(args.out + "/report.json", res);
        std::cout << "feasible margin=" << res.margin << " sigma=" << res.sigma
                  << " backend=" << res.backend << "\n";
        return kExitOk;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    }
}

int cmd_simulate(const CommonArgs& args) {
    ScenarioConfig cfg = load_scenario(args.scenario);
    if (args.gains.empty()) throw ValidationError("simulate requires --gains");
    auto gains = load_gains(args.gains);
    std::vector<Mat> weights;
    if (!args.weights.empty()) weights = load_trigger_weights(args.weights);
    const int horizon = args.horizon > 0 ? args.horizon : cfg.horizon;
    SimTrace trace = simulate_scenario(cfg, gains, weights, horizon);
    fs::create_directories(args.out);
    write_states_csv(args.out + "/states.csv", trace);
    write_inputs_csv(args.out + "/inputs.csv", trace);
    write_triggers_csv(args.out + "/triggers.csv", trace);
    write_metrics_csv(args.out + "/metrics.csv", trace);
    write_plot_script(args.out + "/plots.py");
    std::cout << "horizon=" << horizon << " consensus_final=" << trace.consensus_error.back()
              << " trs=[" << trace.trs.transpose() << "]\n";
    return kExitOk;
}

int cmd_verify(const CommonArgs& args) {
    ScenarioConfig cfg = load_scenario(args.scenario);
    if (args.gains.empty()) throw ValidationError("verify requires --gains");
    if (args.report.empty()) throw ValidationError("verify requires --report (from synth)");
    auto gains = load_gains(args.gains);
    std::ifstream in(args.report);
    if (!in) throw ParseError("cannot open report: " + args.report);
    nlohmann::json j;
    in >> j;
    Mat P = matrix_from_json(j.at("P"));
    std::vector<Mat> Omega;
    for (const auto& jm : j.at("trigger_weights")) Omega.push_back(matrix_from_json(jm));
    VerifyReport rep = verify(cfg.build_agents(), cfg.topology, cfg.alphas(), cfg.betas(),
                              cfg.kappa, gains, P, Omega);
    std::cout << (rep.ok ? "ok" : "FAIL") << " worst_eig=" << rep.worst_eig
              << " vertices=" << rep.vertices_checked << "\n";
    return rep.ok ? kExitOk : kExitInfeasible;
}

int cmd_compare(const CommonArgs& args) {
    ScenarioConfig cfg = load_scenario(args.scenario);
    if (args.gains.empty()) throw ValidationError("compare requires --gains");
    auto gains = load_gains(args.gains);
    std::vector<Mat> weights;
    if (!args.weights.empty()) weights = load_trigger_weights(args.weights);
    const int horizon = args.horizon > 0 ? args.horizon : cfg.horizon;

    auto agents = cfg.build_agents();
    auto graph = build_graph_matrices(cfg.topology);
    auto base = cfg.build_detm_params();
    if (!weights.empty())
        for (std::size_t i = 0; i < base.size(); ++i) base[i].weight_override = weights[i];

    std::vector<std::pair<std::string, std::vector<DetmParams>>> variants;
    variants.emplace_back("dynamic_memory", base);
    auto static_thr = base;
    for (auto& p : static_thr) p.beta = 0.0;
    variants.emplace_back("static_threshold", static_thr);
    auto time_trig = base;
    for (auto& p : time_trig) p.alpha = 0.0;
    variants.emplace_back("time_triggered", time_trig);
    auto memoryless = base;
    for (auto& p : memoryless) {
        p.weight_override = Mat();
        p.H = memoryless_H(p.kappa, static_cast<int>(p.omega.rows()));
    }
    variants.emplace_back("memoryless_weight", memoryless);

    SimConfig sim_cfg;
    sim_cfg.horizon = horizon;
    sim_cfg.x0 = cfg.initial_states();
    auto rows = compare_mechanisms(agents, graph, gains, variants, sim_cfg);

    fs::create_directories(args.out);
    std::ofstream out(args.out + "/compare.csv");
    out << "variant,stable,settling_step,consensus_final";
    for (int i = 0; i < cfg.agent_count(); ++i) out << ",trs" << i;
    out << "\n";
    for (const auto& row : rows) {
        out << row.name << "," << (row.stable ? 1 : 0) << "," << row.settling_step << ","
            << row.consensus_at_horizon;
        for (Eigen::Index i = 0; i < row.trs.size(); ++i) out << "," << row.trs(i);
        for (Eigen::Index i = row.trs.size(); i < cfg.agent_count(); ++i) out << ",";
        out << "\n";
        std::cout << row.name << (row.stable ? "" : " (diverged)") << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-triggered fuzzy multi-agent controller workbench"};
    app.require_subcommand(1);
    CommonArgs args;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", args.scenario, "scenario config file")->required();
        sub->add_option("--gains", args.gains, "gain file (JSON)");
        sub->add_option("--weights", args.weights, "trigger weight file from synth");
        sub->add_option("--report", args.report, "synthesis report file");
        sub->add_option("--out", args.out, "output directory");
        sub->add_option("--sigma", args.sigma, "slack scaling override");
        sub->add_option("--horizon", args.horizon, "simulation horizon override");
        sub->add_option("--epsilon", args.epsilon, "required certificate margin");
        sub->add_option("--seed", args.seed, "random seed for property drivers");
    };
    auto* synth = app.add_subcommand("synth", "solve for stabilizing gains");
    auto* simulate = app.add_subcommand("simulate", "run the closed loop and export traces");
    auto* verify_cmd = app.add_subcommand("verify", "re-check a gain set against the stability condition");
    auto* compare = app.add_subcommand("compare", "tabulate trigger-mechanism variants");
    for (auto* sub : {synth, simulate, verify_cmd, compare}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (app.got_subcommand(synth)) return cmd_synth(args);
        if (app.got_subcommand(simulate)) return cmd_simulate(args);
        if (app.got_subcommand(verify_cmd)) return cmd_verify(args);
        if (app.got_subcommand(compare)) return cmd_compare(args);
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    }
    return kExitConfig;
}
