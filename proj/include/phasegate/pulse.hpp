// Control field representation and the standard guess pulse.
//
// The optimizer treats the field as piecewise constant: n_steps amplitude
// samples living at the interval midpoints t_k = (k+1/2) dt.  The update
// shape S(t) = sin^2(pi t / T) vanishes at the pulse edges, which pins the
// field to its guess value (zero, to Gaussian-tail accuracy) at t=0 and t=T.
#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "phasegate/csv.hpp"
#include "phasegate/errors.hpp"
#include "phasegate/units.hpp"

namespace phasegate {

struct ControlField {
    double duration = 0.0;     // T, atomic units
    int n_steps = 0;           // number of piecewise-constant intervals
    Eigen::VectorXd amplitude; // n_steps samples at interval midpoints
    double carrier = 0.0;      // carrier angular frequency (metadata)

    double dt() const { return duration / n_steps; }
    double midpoint_time(int k) const { return (k + 0.5) * dt(); }

    double peak() const { return amplitude.cwiseAbs().maxCoeff(); }

    // Integrated squared field; the optimizer reports fluence relative to
    // the guess.
    double fluence() const { return amplitude.squaredNorm() * dt(); }

    // Update-shape gate at the midpoint of interval k.  The first and last
    // interval are clamped to zero so the endpoints never move.
    double shape(int k) const {
        if (k <= 0 || k >= n_steps - 1) return 0.0;
        const double s = std::sin(M_PI * midpoint_time(k) / duration);
        return s * s;
    }
};

// Gaussian envelope (FWHM = T/6, centered) carrying a single-atom pulse
// area of 2 pi at the given carrier frequency.
inline ControlField guess_pulse(double duration, int n_steps, double mu0,
                                double carrier, double detuning = 0.0) {
    if (!(duration > 0.0) || n_steps < 4)
        throw ConfigError("guess pulse needs duration > 0 and n_steps >= 4");
    ControlField f;
    f.duration = duration;
    f.n_steps = n_steps;
    f.carrier = carrier + detuning;
    const double sigma =
        duration / (6.0 * 2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double amp = 2.0 * M_PI / (mu0 * sigma * std::sqrt(2.0 * M_PI));
    f.amplitude.resize(n_steps);
    for (int k = 0; k < n_steps; ++k) {
        const double t = f.midpoint_time(k) - 0.5 * duration;
        f.amplitude[k] =
            amp * std::exp(-0.5 * t * t / (sigma * sigma)) * std::cos(f.carrier * t);
    }
    return f;
}

inline void write_field_csv(const std::string& path, const ControlField& f,
                            const std::string& config_hash) {
    CsvWriter csv(path);
    csv.comment("config-hash: " + config_hash);
    csv.comment("duration_au: " + CsvWriter::num(f.duration));
    csv.comment("carrier_au: " + CsvWriter::num(f.carrier));
    csv.header({"t_fs", "epsilon_au"});
    for (int k = 0; k < f.n_steps; ++k)
        csv.row({CsvWriter::num(units::atu_to_fs(f.midpoint_time(k))),
                 CsvWriter::num(f.amplitude[k])});
}

inline ControlField load_field_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    const auto t = table.column_values("t_fs");
    const auto eps = table.column_values("epsilon_au");
    if (t.size() < 4) throw ConfigError("field file too short: " + path);
    ControlField f;
    f.n_steps = static_cast<int>(t.size());
    const double dt = units::fs_to_atu(t[1] - t[0]);
    for (size_t k = 1; k + 1 < t.size(); ++k) {
        const double step = units::fs_to_atu(t[k + 1] - t[k]);
        if (std::abs(step - dt) > 1e-9 * dt)
            throw ConfigError("field file must be uniformly sampled: " + path);
    }
    f.duration = f.n_steps * dt;
    // Recover carrier metadata if present; harmless when absent.
    for (const auto& c : table.comments) {
        const std::string key = "carrier_au:";
        if (c.rfind(key, 0) == 0) f.carrier = std::stod(c.substr(key.size()));
        const std::string dkey = "duration_au:";
        if (c.rfind(dkey, 0) == 0) f.duration = std::stod(c.substr(dkey.size()));
    }
    f.amplitude = Eigen::Map<const Eigen::VectorXd>(eps.data(),
                                                    static_cast<long>(eps.size()));
    return f;
}

}  // namespace phasegate
