// Command-line front end: config-driven optimization runs, sweeps,
// crosschecks, eigenstate dumps, and speed-limit estimates.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical abort.
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "phasegate/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string resume;
    int workers = 1;
};

phasegate::ExperimentConfig load(const CommonOpts& opts) {
    phasegate::ExperimentConfig cfg = phasegate::load_config(opts.config_path);
    if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
    if (opts.workers > 0) cfg.krotov.workers = opts.workers;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_resume) {
    cmd->add_option("config", opts.config_path, "experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out_dir, "output directory override");
    cmd->add_option("--workers", opts.workers, "parallel worker count")
        ->check(CLI::PositiveNumber);
    if (with_resume)
        cmd->add_option("--resume", opts.resume,
                        "optimize: field CSV to continue from; "
                        "sweep: reuse finished points in the output tree");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "phasegate: optimal-control synthesis and analysis of a "
        "trapped-atom controlled phasegate"};
    app.require_subcommand(1);

    CommonOpts opt_optimize, opt_sweep, opt_cross, opt_eigen, opt_estimate;
    std::string pulse_file;

    auto* cmd_optimize = app.add_subcommand(
        "optimize", "run one pulse optimization and write all artifacts");
    add_common(cmd_optimize, opt_optimize, true);

    auto* cmd_sweep = app.add_subcommand(
        "sweep", "optimize across gate times or interaction strengths");
    add_common(cmd_sweep, opt_sweep, true);

    auto* cmd_cross = app.add_subcommand(
        "crosscheck", "re-propagate a pulse under reduced and full models");
    add_common(cmd_cross, opt_cross, false);
    cmd_cross->add_option("--pulse", pulse_file, "optimized pulse CSV");

    auto* cmd_eigen = app.add_subcommand(
        "eigenstates", "bound states of one channel potential");
    add_common(cmd_eigen, opt_eigen, false);

    auto* cmd_estimate = app.add_subcommand(
        "estimate", "analytic speed-limit times for the configured system");
    add_common(cmd_estimate, opt_estimate, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_optimize->parsed()) {
            const auto cfg = load(opt_optimize);
            const auto run = phasegate::run_optimize(cfg, opt_optimize.resume);
            std::cout << "F = " << run.report.fidelity
                      << "  chi/pi = " << run.report.chi / M_PI
                      << "  F00 = " << run.report.f00 << "\n"
                      << "artifacts in " << run.out_dir << "\n";
        } else if (cmd_sweep->parsed()) {
            const auto cfg = load(opt_sweep);
            const auto sweep = phasegate::run_sweep(
                cfg, opt_sweep.workers, !opt_sweep.resume.empty());
            int failed = 0;
            for (const auto& p : sweep.points)
                if (p.status.rfind("failed", 0) == 0) ++failed;
            std::cout << "sweep of " << sweep.points.size() << " points ("
                      << failed << " failed) -> " << sweep.summary_path
                      << "\n";
        } else if (cmd_cross->parsed()) {
            const auto cfg = load(opt_cross);
            const auto res = phasegate::run_crosscheck(cfg, pulse_file);
            std::cout << "F_reduced = " << res.f_reduced << "\n"
                      << "F_full    = " << res.f_full << "\n"
                      << "|delta_F| = " << std::abs(res.delta) << "\n";
        } else if (cmd_eigen->parsed()) {
            const auto cfg = load(opt_eigen);
            phasegate::run_eigenstates(cfg);
            std::cout << "eigenpairs written to " << cfg.output_dir << "\n";
        } else if (cmd_estimate->parsed()) {
            const auto cfg = load(opt_estimate);
            phasegate::run_estimate(cfg);
        }
    } catch (const phasegate::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const phasegate::NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}
