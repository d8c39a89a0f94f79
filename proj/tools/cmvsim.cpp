// cmvsim: command line front end for the cmv library.
//
// Subcommands:
//   simulate    run one particle-system simulation, write trajectory + diagnostics
//   experiment  run the convergence sweep, write raw/summary CSVs, meta JSON, plot
//   w1          exact W1 distance between two weighted point clouds (CSV in, number out)
//   plot        render a log-log convergence plot from a summary CSV
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "cmv/config.hpp"
#include "cmv/diagnostics.hpp"
#include "cmv/experiment.hpp"
#include "cmv/io.hpp"
#include "cmv/plot.hpp"
#include "cmv/sde.hpp"
#include "cmv/version.hpp"
#include "cmv/wasserstein.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    cmv::rng::u64 seed = 0;
    int n_particles = 0;
    double delta = 0.0;
    int trials = 0;
    std::string out_prefix;
    std::string renormalize;  // "on" or "off"
};

// Attach the override flags shared by `simulate` and `experiment`.  Returns the
// option pointers so the caller can test whether a flag was actually given.
struct CommonOptions {
    CLI::Option* seed = nullptr;
    CLI::Option* n_particles = nullptr;
    CLI::Option* delta = nullptr;
    CLI::Option* trials = nullptr;
    CLI::Option* out = nullptr;
    CLI::Option* renormalize = nullptr;
};

CommonOptions add_common_flags(CLI::App* cmd, CommonFlags& flags, bool with_trials) {
    CommonOptions opts;
    cmd->add_option("--config", flags.config_path, "path to the run configuration file")
        ->required();
    opts.seed = cmd->add_option("--seed", flags.seed, "override the master seed");
    opts.n_particles =
        cmd->add_option("--N", flags.n_particles, "override the particle count")
            ->check(CLI::PositiveNumber);
    opts.delta = cmd->add_option("--delta", flags.delta, "override the step size")
                     ->check(CLI::PositiveNumber);
    if (with_trials) {
        opts.trials = cmd->add_option("--trials", flags.trials, "override the trial count")
                          ->check(CLI::PositiveNumber);
    }
    opts.out = cmd->add_option("--out", flags.out_prefix, "override the output prefix");
    opts.renormalize =
        cmd->add_option("--renormalize", flags.renormalize,
                        "renormalize weights after every step (on) or only at read-out (off)")
            ->check(CLI::IsMember({"on", "off"}));
    return opts;
}

cmv::ExperimentConfig load_with_overrides(const CommonFlags& flags, const CommonOptions& opts) {
    cmv::ExperimentConfig cfg = cmv::load_config(flags.config_path);
    if (opts.seed->count() > 0) cfg.seed = flags.seed;
    if (opts.n_particles->count() > 0) cfg.N_list = {flags.n_particles};
    if (opts.delta->count() > 0) cfg.delta = flags.delta;
    if (opts.trials != nullptr && opts.trials->count() > 0) cfg.trials = flags.trials;
    if (opts.out->count() > 0) cfg.out_prefix = flags.out_prefix;
    if (opts.renormalize->count() > 0) cfg.renormalize = (flags.renormalize == "on");
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw cmv::ConfigError(e.what());
    }
    return cfg;
}

int cmd_simulate(const cmv::ExperimentConfig& cfg) {
    const int N = cfg.N_list.front();

    cmv::SimulationConfig sim;
    sim.N = N;
    sim.delta = cfg.delta;
    sim.T = cfg.T;
    sim.renormalize_each_step = cfg.renormalize;
    sim.seed = cmv::rng::trial_seed(cfg.seed, static_cast<cmv::rng::u64>(N), 0);
    sim.x = {2.0 * cfg.params.x0};

    const cmv::ModelSpec spec = cmv::benchmark_model(cfg.params);
    const cmv::PathBundle paths = cmv::generate_paths(sim, spec.m, spec.k);
    const cmv::Trajectory particle = cmv::simulate_particle_system(sim, spec, paths);
    const cmv::Trajectory reference = cmv::simulate_reference(cfg.params, paths, cfg.renormalize);

    const cmv::CoupledRun run{particle, reference, cfg.delta};
    const std::vector<double> psi = cmv::multiplier_psi(run, cfg.alpha);

    cmv::DiagnosticsReport report;
    report.psi_min = *std::min_element(psi.begin(), psi.end());
    report.tau = cmv::tau_beta(run, cfg.beta);
    report.eN = cmv::error_eN(run);
    double lmean = 0.0;
    for (std::size_t i = 0; i < particle.back().loglik.size(); ++i)
        lmean += std::exp(particle.back().loglik[i]);
    report.likelihood_mean = lmean / static_cast<double>(N);

    const std::string traj_path = cfg.out_prefix + "_trajectory.csv";
    const std::string diag_path = cfg.out_prefix + "_diagnostics.json";
    cmv::write_trajectory_csv(traj_path, particle);
    std::ofstream out(diag_path);
    if (!out) throw std::runtime_error("cannot open output file: " + diag_path);
    out << cmv::to_json(report).dump(2) << '\n';
    if (!out) throw std::runtime_error("failed while writing: " + diag_path);

    std::printf("simulate: N=%d steps=%d e_N=%.6g psi_min=%.6g\n", N,
                static_cast<int>(run.steps()), report.eN, report.psi_min);
    std::printf("wrote %s\n", traj_path.c_str());
    std::printf("wrote %s\n", diag_path.c_str());
    return 0;
}

int cmd_experiment(const cmv::ExperimentConfig& cfg) {
    const cmv::ExperimentResult res = cmv::run_sweep(cfg);
    cmv::write_results(res, cfg.out_prefix);
    std::printf("wrote %s_raw.csv\n", cfg.out_prefix.c_str());
    std::printf("wrote %s_summary.csv\n", cfg.out_prefix.c_str());
    std::printf("wrote %s_meta.json\n", cfg.out_prefix.c_str());

    for (const cmv::SummaryRow& row : res.summary) {
        std::printf("N=%-4d mean_eN=%.6g stderr=%.6g trials=%d\n", row.N, row.mean_eN,
                    row.stderr_eN, row.trials);
    }
    if (res.summary.size() >= 2 && res.fit.has_value()) {
        std::vector<std::pair<double, double>> points;
        points.reserve(res.summary.size());
        for (const cmv::SummaryRow& row : res.summary)
            points.emplace_back(static_cast<double>(row.N), row.mean_eN);
        const std::string plot_path = cfg.out_prefix + "_plot.svg";
        cmv::render_plot(points, plot_path);
        std::printf("wrote %s\n", plot_path.c_str());
        std::printf("fit: slope=%.4f r2=%.4f\n", res.fit->slope, res.fit->r2);
    }
    return 0;
}

int cmd_w1(const std::string& path_a, const std::string& path_b) {
    const cmv::WeightedEmpiricalMeasure mu = cmv::read_cloud_csv(path_a);
    const cmv::WeightedEmpiricalMeasure nu = cmv::read_cloud_csv(path_b);
    const double d = (mu.dim() == 1 && nu.dim() == 1) ? cmv::w1_1d(mu, nu)
                                                      : cmv::w1_exact(mu, nu);
    std::printf("%.12g\n", d);
    return 0;
}

int cmd_plot(const std::string& summary_path, const std::string& out_path) {
    const std::vector<cmv::SummaryRow> rows = cmv::read_summary_csv(summary_path);
    std::vector<std::pair<double, double>> points;
    points.reserve(rows.size());
    for (const cmv::SummaryRow& row : rows)
        points.emplace_back(static_cast<double>(row.N), row.mean_eN);
    cmv::render_plot(points, out_path);
    std::printf("wrote %s\n", out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"weighted interacting-particle simulator for conditional McKean-Vlasov SDEs"};
    app.set_version_flag("--version", std::string("cmvsim ") + cmv::kVersion);
    app.require_subcommand(1);

    CommonFlags sim_flags;
    CLI::App* simulate = app.add_subcommand(
        "simulate", "run one particle-system simulation and write trajectory + diagnostics");
    const CommonOptions sim_opts = add_common_flags(simulate, sim_flags, false);

    CommonFlags exp_flags;
    CLI::App* experiment = app.add_subcommand(
        "experiment", "run the convergence sweep over N and write CSV/JSON/SVG results");
    const CommonOptions exp_opts = add_common_flags(experiment, exp_flags, true);

    std::string w1_a;
    std::string w1_b;
    CLI::App* w1 = app.add_subcommand(
        "w1", "print the exact W1 distance between two weighted point clouds");
    w1->add_option("cloud_a", w1_a, "first cloud CSV (weight,x_0,...)")->required();
    w1->add_option("cloud_b", w1_b, "second cloud CSV (weight,x_0,...)")->required();

    std::string plot_summary;
    std::string plot_out = "plot.svg";
    CLI::App* plot = app.add_subcommand(
        "plot", "render a log-log convergence plot from a summary CSV");
    plot->add_option("summary", plot_summary, "summary CSV (N,mean_eN,stderr_eN,trials)")
        ->required();
    plot->add_option("--out", plot_out, "output SVG path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(load_with_overrides(sim_flags, sim_opts));
        if (experiment->parsed()) return cmd_experiment(load_with_overrides(exp_flags, exp_opts));
        if (w1->parsed()) return cmd_w1(w1_a, w1_b);
        if (plot->parsed()) return cmd_plot(plot_summary, plot_out);
    } catch (const cmv::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
