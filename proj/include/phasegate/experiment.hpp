// Experiment runners: one optimization, gate-time / interaction sweeps,
// reduced-vs-full crosschecks, eigenstate dumps, and speed-limit estimates.
// Every runner persists its artifacts as CSV (plus a flat key-value report)
// into the output directory; each file carries the config hash so results
// trace back to the exact setup that produced them.
#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "phasegate/analysis.hpp"
#include "phasegate/config.hpp"
#include "phasegate/threading.hpp"

namespace phasegate {

struct RunOutcome {
    GateReport report;
    KrotovResult optimization;
    std::string out_dir;
};

namespace detail {

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw ConfigError("cannot create output directory '" + dir +
                          "': " + ec.message());
}

inline std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

inline void echo_config(const ExperimentConfig& cfg, const std::string& dir) {
    std::ofstream out(join(dir, "config_echo.cfg"));
    out << "# config-hash: " << cfg.hash << "\n" << cfg.canonical_text;
}

inline void write_convergence_csv(const std::string& path,
                                  const ExperimentConfig& cfg,
                                  const KrotovResult& kres) {
    CsvWriter csv(path);
    csv.comment("config-hash: " + cfg.hash);
    csv.comment("alpha: " + CsvWriter::num(kres.alpha_used));
    csv.comment("storage-stride: " + std::to_string(kres.storage_stride));
    csv.header({"iteration", "J", "F", "delta_F", "fluence_ratio"});
    for (const auto& rec : kres.history)
        csv.row({std::to_string(rec.iteration), CsvWriter::num(rec.j_total),
                 CsvWriter::num(rec.fidelity), CsvWriter::num(rec.delta_f),
                 CsvWriter::num(rec.fluence_ratio)});
}

inline void write_gate_report(const std::string& dir,
                              const ExperimentConfig& cfg,
                              const GateReport& rep,
                              const KrotovResult& kres) {
    {
        std::ofstream out(join(dir, "gate_report.txt"));
        out << "# config-hash: " << cfg.hash << "\n";
        auto kvline = [&](const std::string& k, double v) {
            out << k << " = " << CsvWriter::num(v) << "\n";
        };
        kvline("T_fs", units::atu_to_fs(cfg.duration));
        kvline("C3_au", cfg.params.c3);
        kvline("tau_re", rep.tau.real());
        kvline("tau_im", rep.tau.imag());
        kvline("fidelity", rep.fidelity);
        kvline("f00", rep.f00);
        kvline("phase_00_rad", rep.phase_00);
        kvline("phase_01_rad", rep.phase_01);
        kvline("phase_10_rad", rep.phase_10);
        kvline("phase_11_rad", rep.phase_11);
        kvline("chi_rad", rep.chi);
        kvline("chi_over_pi", rep.chi / M_PI);
        kvline("g1", rep.g1);
        kvline("g2", rep.g2);
        kvline("concurrence", rep.concurrence);
        kvline("iterations", kres.history.empty()
                                 ? 0
                                 : kres.history.back().iteration);
        kvline("final_delta_f", kres.history.empty()
                                    ? 0.0
                                    : kres.history.back().delta_f);
        kvline("fluence_ratio", kres.history.empty()
                                    ? 1.0
                                    : kres.history.back().fluence_ratio);
        kvline("alpha", kres.alpha_used);
        kvline("max_monotonicity_violation", kres.max_monotonicity_violation);
        out << "converged = " << (kres.converged ? "true" : "false") << "\n";
        out << "stop_reason = " << kres.stop_reason << "\n";
        out << "phases_defined = " << (rep.phases_defined ? "true" : "false")
            << "\n";
        out << "chi_interval = [0, 2pi)\n";
    }
    CsvWriter csv(join(dir, "gate_report.csv"));
    csv.comment("config-hash: " + cfg.hash);
    csv.header({"T_fs", "C3_au", "F", "chi_over_pi", "F00", "g1", "g2",
                "concurrence", "iterations"});
    csv.row({CsvWriter::num(units::atu_to_fs(cfg.duration)),
             CsvWriter::num(cfg.params.c3), CsvWriter::num(rep.fidelity),
             CsvWriter::num(rep.chi / M_PI), CsvWriter::num(rep.f00),
             CsvWriter::num(rep.g1), CsvWriter::num(rep.g2),
             CsvWriter::num(rep.concurrence),
             std::to_string(kres.history.empty()
                                ? 0
                                : kres.history.back().iteration)});
}

// Channel populations under `field`, sampled every `stride` nodes.
inline void write_populations_csv(const std::string& path,
                                  const ExperimentConfig& cfg,
                                  const ChannelSystem& sys,
                                  const TargetSet& targets,
                                  const ControlField& field) {
    const int stride = std::max(1, cfg.trace_stride);
    const int nt = field.n_steps;
    std::vector<std::string> columns = {"t_fs"};
    for (const auto& block : sys.blocks)
        for (const auto& label : block.labels)
            columns.push_back(
                "pop_" + (block.is_tls ? (label == "0" ? std::string("01")
                                                       : std::string("a1"))
                                       : label));
    columns.push_back("norm_err");

    // Gather per-block population snapshots.
    std::vector<std::vector<Eigen::VectorXd>> pops(sys.blocks.size());
    for (size_t b = 0; b < sys.blocks.size(); ++b) {
        PropagatorSpec ps = cfg.propagator;
        ps.dt = field.dt();
        BlockPropagator prop(sys, sys.blocks[b], ps, field.peak());
        Eigen::MatrixXcd psi = targets.initial[b];
        propagate_block(sys, sys.blocks[b], prop, psi, field, +1,
                        [&](int node, const Eigen::MatrixXcd& s) {
                            if (node % stride == 0)
                                pops[b].push_back(
                                    block_populations(sys, sys.blocks[b], s));
                        });
    }

    CsvWriter csv(path);
    csv.comment("config-hash: " + cfg.hash);
    csv.header(columns);
    for (size_t row = 0; row < pops[0].size(); ++row) {
        std::vector<std::string> cells = {CsvWriter::num(
            units::atu_to_fs(static_cast<double>(row) * stride * field.dt()))};
        double norm_err = 0.0;
        for (size_t b = 0; b < sys.blocks.size(); ++b) {
            for (int c = 0; c < pops[b][row].size(); ++c)
                cells.push_back(CsvWriter::num(pops[b][row][c]));
            norm_err = std::max(norm_err,
                                std::abs(pops[b][row].sum() - 1.0));
        }
        cells.push_back(CsvWriter::num(norm_err));
        csv.row(cells);
    }
    (void)nt;
}

inline void write_phase_trace_csv(const std::string& path,
                                  const ExperimentConfig& cfg,
                                  const ChannelSystem& sys,
                                  const TargetSet& targets,
                                  const ControlField& field) {
    const PhaseTrace trace = phase_trace(sys, targets, field, cfg.propagator,
                                         std::max(1, cfg.trace_stride));
    CsvWriter csv(path);
    csv.comment("config-hash: " + cfg.hash);
    std::vector<std::string> columns = {"t_fs"};
    for (const auto& name : trace.names) {
        columns.push_back(name + "_re");
        columns.push_back(name + "_im");
    }
    csv.header(columns);
    for (size_t row = 0; row < trace.times.size(); ++row) {
        std::vector<std::string> cells = {
            CsvWriter::num(units::atu_to_fs(trace.times[row]))};
        for (const auto& tau : trace.tau) {
            cells.push_back(CsvWriter::num(tau[row].real()));
            cells.push_back(CsvWriter::num(tau[row].imag()));
        }
        csv.row(cells);
    }
}

inline void write_spectrum_csv(const std::string& path,
                               const ExperimentConfig& cfg,
                               const ControlField& field) {
    const PulseSpectrum spec = pulse_spectrum(field);
    CsvWriter csv(path);
    csv.comment("config-hash: " + cfg.hash);
    csv.comment("peak_cm1: " + CsvWriter::num(spec.peak_cm1));
    csv.comment("bin_width_cm1: " + CsvWriter::num(spec.bin_width_cm1));
    csv.header({"freq_cm1", "intensity"});
    for (const auto& line : spec.lines)
        csv.row({CsvWriter::num(line.freq_cm1),
                 CsvWriter::num(line.intensity)});
}

}  // namespace detail

// Single optimization run with full artifact output.
inline RunOutcome run_optimize(const ExperimentConfig& cfg,
                               const std::string& resume_field = "") {
    detail::ensure_dir(cfg.output_dir);
    detail::echo_config(cfg, cfg.output_dir);

    ChannelSystem sys = build_system(cfg);
    const TargetSet targets = build_targets(sys, cfg.duration, cfg.gate_phase);
    ControlField guess = guess_pulse(cfg.duration, config_steps(cfg),
                                     cfg.params.mu0, cfg.carrier,
                                     cfg.detuning);
    if (!resume_field.empty()) {
        ControlField loaded = load_field_csv(resume_field);
        if (loaded.n_steps != guess.n_steps ||
            std::abs(loaded.duration - guess.duration) >
                1e-9 * guess.duration)
            throw ConfigError("resume field lattice does not match config");
        guess.amplitude = loaded.amplitude;
    }
    write_field_csv(detail::join(cfg.output_dir, "field_guess.csv"), guess,
                    cfg.hash);

    KrotovResult kres =
        krotov_optimize(sys, targets, guess, cfg.krotov, cfg.propagator);
    const GateReport rep =
        analyze_gate(sys, targets, kres.final_states, cfg.duration);

    write_field_csv(detail::join(cfg.output_dir, "field_optimized.csv"),
                    kres.field, cfg.hash);
    detail::write_convergence_csv(
        detail::join(cfg.output_dir, "convergence.csv"), cfg, kres);
    detail::write_gate_report(cfg.output_dir, cfg, rep, kres);
    detail::write_populations_csv(
        detail::join(cfg.output_dir, "populations.csv"), cfg, sys, targets,
        kres.field);
    detail::write_phase_trace_csv(
        detail::join(cfg.output_dir, "phase_trace.csv"), cfg, sys, targets,
        kres.field);
    detail::write_spectrum_csv(detail::join(cfg.output_dir, "spectrum.csv"),
                               cfg, kres.field);
    return {rep, std::move(kres), cfg.output_dir};
}

struct SweepPointResult {
    double value = 0.0;  // sweep variable, atomic units
    std::string status = "ok";
    GateReport report;
    KrotovResult optimization;
};

struct SweepResult {
    std::vector<SweepPointResult> points;
    std::string summary_path;
};

// Independent optimizations, one per sweep value.  Failed points are
// recorded in the summary but do not stop the sweep.  With resume=true,
// points whose gate_report.csv already exists in the output tree are loaded
// instead of rerun.
inline SweepResult run_sweep(const ExperimentConfig& cfg, int workers = 1,
                             bool resume = false) {
    if (cfg.sweep_variable == SweepVariable::None)
        throw ConfigError("config has no sweep definition");
    detail::ensure_dir(cfg.output_dir);
    detail::echo_config(cfg, cfg.output_dir);

    const size_t n = cfg.sweep_values.size();
    SweepResult result;
    result.points.resize(n);

    parallel_for(static_cast<int>(n), workers, [&](int i) {
        SweepPointResult& point = result.points[i];
        point.value = cfg.sweep_values[i];
        char tag[32];
        std::snprintf(tag, sizeof(tag), "point_%02d", i);
        ExperimentConfig sub = cfg;
        sub.sweep_variable = SweepVariable::None;
        sub.sweep_values.clear();
        sub.output_dir = detail::join(cfg.output_dir, tag);
        sub.krotov.workers = 1;  // sweep-level parallelism owns the budget
        if (cfg.sweep_variable == SweepVariable::GateTime) {
            const double steps = point.value / cfg.dt;
            if (std::abs(steps - std::round(steps)) > 1e-9 * steps) {
                point.status = "failed: gate time not a multiple of dt";
                return;
            }
            sub.duration = point.value;
        } else {
            sub.params.c3 = point.value;
        }
        const std::string done_marker =
            detail::join(sub.output_dir, "gate_report.csv");
        try {
            if (resume && std::filesystem::exists(done_marker)) {
                const CsvTable t = read_csv(done_marker);
                point.report.fidelity = t.value(0, "F");
                point.report.chi = t.value(0, "chi_over_pi") * M_PI;
                point.report.f00 = t.value(0, "F00");
                point.report.g1 = t.value(0, "g1");
                point.report.g2 = t.value(0, "g2");
                point.report.concurrence = t.value(0, "concurrence");
                point.status = "resumed";
                return;
            }
            RunOutcome out = run_optimize(sub);
            point.report = out.report;
            point.optimization = std::move(out.optimization);
        } catch (const std::exception& e) {
            point.status = std::string("failed: ") + e.what();
        }
    });

    result.summary_path = detail::join(cfg.output_dir, "sweep_summary.csv");
    CsvWriter csv(result.summary_path);
    csv.comment("config-hash: " + cfg.hash);
    csv.comment(std::string("sweep-variable: ") +
                (cfg.sweep_variable == SweepVariable::GateTime ? "gate_time"
                                                               : "c3"));
    csv.header({"T_fs", "C3_au", "F", "chi_over_pi", "F00", "g1", "g2",
                "concurrence", "iterations", "delta_f", "status"});
    for (size_t i = 0; i < n; ++i) {
        const auto& point = result.points[i];
        const double t_au = cfg.sweep_variable == SweepVariable::GateTime
                                ? point.value
                                : cfg.duration;
        const double c3 = cfg.sweep_variable == SweepVariable::C3
                              ? point.value
                              : cfg.params.c3;
        const auto& hist = point.optimization.history;
        csv.row({CsvWriter::num(units::atu_to_fs(t_au)), CsvWriter::num(c3),
                 CsvWriter::num(point.report.fidelity),
                 CsvWriter::num(point.report.chi / M_PI),
                 CsvWriter::num(point.report.f00),
                 CsvWriter::num(point.report.g1),
                 CsvWriter::num(point.report.g2),
                 CsvWriter::num(point.report.concurrence),
                 std::to_string(hist.empty() ? 0 : hist.back().iteration),
                 CsvWriter::num(hist.empty() ? 0.0 : hist.back().delta_f),
                 point.status});
    }
    return result;
}

struct CrosscheckResult {
    double f_reduced = 0.0, f_full = 0.0, delta = 0.0;
    double chi_reduced = 0.0, chi_full = 0.0;
};

// Re-propagate a pulse under both descriptions and compare fidelities.
// No optimization happens here; the pulse is taken as-is.
inline CrosscheckResult run_crosscheck(const ExperimentConfig& cfg,
                                       const std::string& pulse_path) {
    const std::string path =
        pulse_path.empty() ? cfg.pulse_file : pulse_path;
    if (path.empty())
        throw ConfigError("crosscheck needs a pulse file "
                          "(crosscheck.pulse_file or --pulse)");
    const ControlField field = load_field_csv(path);
    if (field.n_steps != config_steps(cfg) ||
        std::abs(field.duration - cfg.duration) > 1e-6 * cfg.duration)
        throw ConfigError(
            "pulse lattice does not match config (steps " +
            std::to_string(field.n_steps) + " vs " +
            std::to_string(config_steps(cfg)) + ")");
    detail::ensure_dir(cfg.output_dir);
    detail::echo_config(cfg, cfg.output_dir);

    CrosscheckResult res;
    for (const bool full : {false, true}) {
        ExperimentConfig sub = cfg;
        sub.mode = full ? SystemMode::Full8 : SystemMode::Reduced4Plus2;
        ChannelSystem sys = build_system(sub);
        const TargetSet targets =
            build_targets(sys, sub.duration, sub.gate_phase);
        std::vector<Eigen::MatrixXcd> finals;
        for (size_t b = 0; b < sys.blocks.size(); ++b) {
            PropagatorSpec ps = sub.propagator;
            ps.dt = field.dt();
            BlockPropagator prop(sys, sys.blocks[b], ps, field.peak());
            Eigen::MatrixXcd psi = targets.initial[b];
            propagate_block(sys, sys.blocks[b], prop, psi, field, +1);
            finals.push_back(std::move(psi));
        }
        const GateReport rep = analyze_gate(sys, targets, finals, sub.duration);
        (full ? res.f_full : res.f_reduced) = rep.fidelity;
        (full ? res.chi_full : res.chi_reduced) = rep.chi;
    }
    res.delta = res.f_full - res.f_reduced;

    std::ofstream out(detail::join(cfg.output_dir, "crosscheck_report.txt"));
    out << "# config-hash: " << cfg.hash << "\n";
    out << "pulse_file = " << path << "\n";
    out << "F_reduced = " << CsvWriter::num(res.f_reduced) << "\n";
    out << "F_full = " << CsvWriter::num(res.f_full) << "\n";
    out << "delta_F = " << CsvWriter::num(res.delta) << "\n";
    out << "abs_delta_F = " << CsvWriter::num(std::abs(res.delta)) << "\n";
    out << "chi_reduced_rad = " << CsvWriter::num(res.chi_reduced) << "\n";
    out << "chi_full_rad = " << CsvWriter::num(res.chi_full) << "\n";
    return res;
}

// Bound states of one channel potential, written as one CSV row per state.
inline void run_eigenstates(const ExperimentConfig& cfg) {
    detail::ensure_dir(cfg.output_dir);
    detail::echo_config(cfg, cfg.output_dir);
    ChannelSystem sys = build_system(cfg);

    const ChannelBlock* found_block = nullptr;
    int found_col = -1;
    for (const auto& block : sys.blocks) {
        if (block.is_tls) continue;
        for (size_t c = 0; c < block.labels.size(); ++c)
            if (block.labels[c] == cfg.eigen_channel) {
                found_block = &block;
                found_col = static_cast<int>(c);
            }
    }
    if (!found_block)
        throw ConfigError("eigen.channel '" + cfg.eigen_channel +
                          "' is not a grid channel of this mode");
    const Eigen::VectorXd v = found_block->potentials.col(found_col);
    const BoundStates bs =
        solve_bound_states(sys.grid, v, cfg.eigen_states);

    const double imag_residue =
        bs.states.imag().cwiseAbs().maxCoeff();
    if (imag_residue > 1e-8)
        throw NumericalError(
            "eigenstate imaginary residue unexpectedly large: " +
            std::to_string(imag_residue));

    CsvWriter csv(detail::join(cfg.output_dir, "eigenpairs.csv"));
    csv.comment("config-hash: " + cfg.hash);
    csv.comment("channel: " + cfg.eigen_channel);
    csv.comment("states are real up to phase gauge; imaginary residue " +
                CsvWriter::num(imag_residue) + " discarded");
    std::vector<std::string> columns = {"n", "energy_hartree"};
    for (int k = 0; k < sys.grid.n(); ++k)
        columns.push_back("psi_" + std::to_string(k));
    csv.header(columns);
    for (int s = 0; s < bs.energies.size(); ++s) {
        std::vector<std::string> cells = {std::to_string(s),
                                          CsvWriter::num(bs.energies[s])};
        for (int k = 0; k < sys.grid.n(); ++k)
            cells.push_back(CsvWriter::num(bs.states(k, s).real()));
        csv.row(cells);
    }
}

// Speed-limit numbers, printed and persisted.
inline SpeedLimits run_estimate(const ExperimentConfig& cfg,
                                std::ostream& os = std::cout) {
    detail::ensure_dir(cfg.output_dir);
    ChannelSystem sys = build_system(cfg);
    const SpeedLimits s = speed_limit_estimates(sys);

    auto report = [&](std::ostream& out) {
        out << "# config-hash: " << cfg.hash << "\n";
        out << "interaction_energy_cm1 = "
            << CsvWriter::num(units::hartree_to_cm1(s.interaction_energy))
            << "\n";
        if (s.interaction_finite) {
            out << "t_int_rad_au = " << CsvWriter::num(s.t_int_rad) << "\n";
            out << "t_int_rad_ps = "
                << CsvWriter::num(units::atu_to_fs(s.t_int_rad) / 1000.0)
                << "\n";
            out << "t_int_pi_au = " << CsvWriter::num(s.t_int_pi) << "\n";
            out << "t_int_pi_ps = "
                << CsvWriter::num(units::atu_to_fs(s.t_int_pi) / 1000.0)
                << "\n";
        } else {
            out << "t_int_rad_au = inf  # zero interaction\n";
            out << "t_int_pi_au = inf  # zero interaction\n";
        }
        out << "t_vib_au = " << CsvWriter::num(s.t_vib) << "\n";
        out << "t_vib_ps = "
            << CsvWriter::num(units::atu_to_fs(s.t_vib) / 1000.0) << "\n";
    };
    report(os);
    std::ofstream file(detail::join(cfg.output_dir, "estimate.txt"));
    report(file);
    return s;
}

}  // namespace phasegate
