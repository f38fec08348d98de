// Experiment configuration: flat key = value text files.
//
// Keys carry their unit as a suffix (trap.omega_mhz, grid.r_max_a0,
// time.duration_fs) and are converted to atomic units at parse time; the
// same physical quantity accepts several unit spellings.  Unknown keys are
// an error: a typo that silently falls back to a default is the most
// expensive failure mode a long optimization run can have.
//
// A canonical 64-bit hash of the parsed configuration is embedded in every
// output artifact so that any CSV can be traced back to the exact run
// setup, and reruns can be diffed byte-for-byte.
#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "phasegate/channels.hpp"
#include "phasegate/errors.hpp"
#include "phasegate/krotov.hpp"
#include "phasegate/units.hpp"

namespace phasegate {

enum class Regime { Toy, Physical };
enum class SweepVariable { None, GateTime, C3 };

struct ExperimentConfig {
    Regime regime = Regime::Toy;
    SystemMode mode = SystemMode::Reduced4Plus2;
    SystemParams params;      // atomic units after parsing
    double mass = 1.0;        // grid (reduced) mass, m_e
    GridSpec grid;            // envelope filled for mapped grids
    double duration = 0.0;    // T, atomic units
    double dt = 0.0;          // time step, atomic units
    double carrier = 0.0;     // guess-pulse carrier; defaults to ea
    double detuning = 0.0;
    double gate_phase = M_PI;
    KrotovOptions krotov;
    PropagatorSpec propagator;
    SweepVariable sweep_variable = SweepVariable::None;
    std::vector<double> sweep_values;  // atomic units
    int trace_stride = 10;
    int eigen_states = 10;
    std::string eigen_channel = "00";
    std::string output_dir = "out";
    std::string pulse_file;   // crosscheck input
    std::uint64_t seed = 0;
    std::string hash;            // canonical config hash (16 hex digits)
    std::string canonical_text;  // sorted key=value echo for provenance
};

namespace detail {

struct KeyValue {
    std::map<std::string, std::string> entries;
    mutable std::map<std::string, bool> used;

    bool has(const std::string& key) const {
        return entries.count(key) != 0;
    }
    std::optional<std::string> get(const std::string& key) const {
        auto it = entries.find(key);
        if (it == entries.end()) return std::nullopt;
        used[key] = true;
        return it->second;
    }
};

inline double to_double(const std::string& key, const std::string& text) {
    try {
        size_t pos = 0;
        const double v = std::stod(text, &pos);
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
            ++pos;
        if (pos != text.size()) throw std::invalid_argument("trailing text");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse number '" +
                          text + "'");
    }
}

// Fetch a quantity that may be spelled in several units; suffix -> factor
// into atomic units.  Returns fallback when none of the spellings appear.
inline double unit_value(const KeyValue& kv, const std::string& stem,
                         const std::vector<std::pair<std::string, double>>& units,
                         std::optional<double> fallback = std::nullopt) {
    std::optional<double> found;
    std::string found_key;
    for (const auto& [suffix, factor] : units) {
        const std::string key = stem + "_" + suffix;
        if (auto text = kv.get(key)) {
            if (found)
                throw ConfigError("config keys '" + found_key + "' and '" + key +
                                  "' both set; pick one unit");
            found = to_double(key, *text) * factor;
            found_key = key;
        }
    }
    if (found) return *found;
    if (fallback) return *fallback;
    throw ConfigError("config is missing required key '" + stem +
                      "_<unit>' (accepted units: first is '" + units[0].first +
                      "')");
}

inline const std::vector<std::pair<std::string, double>>& energy_units() {
    static const std::vector<std::pair<std::string, double>> u = {
        {"au", 1.0}, {"cm1", 1.0 / units::cm1_per_hartree}};
    return u;
}
inline const std::vector<std::pair<std::string, double>>& length_units() {
    static const std::vector<std::pair<std::string, double>> u = {
        {"a0", 1.0}, {"nm", units::bohr_per_nm}};
    return u;
}
inline const std::vector<std::pair<std::string, double>>& time_units() {
    static const std::vector<std::pair<std::string, double>> u = {
        {"au", 1.0},
        {"fs", units::atu_per_fs},
        {"ps", units::atu_per_ps}};
    return u;
}
inline const std::vector<std::pair<std::string, double>>& mass_units() {
    static const std::vector<std::pair<std::string, double>> u = {
        {"au", 1.0}, {"amu", units::me_per_amu}};
    return u;
}
// Trap frequency: _au is an angular frequency; _mhz an ordinary frequency.
inline const std::vector<std::pair<std::string, double>>& omega_units() {
    static const std::vector<std::pair<std::string, double>> u = {
        {"au", 1.0}, {"mhz", units::mhz_to_angular_au(1.0)}};
    return u;
}

inline std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace detail

inline ExperimentConfig parse_config_text(const std::string& text,
                                          const std::string& origin) {
    detail::KeyValue kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        auto strip = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string{};
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": empty key or value");
        if (kv.entries.count(key))
            throw ConfigError(origin + ": duplicate key '" + key + "'");
        kv.entries[key] = value;
    }

    using detail::unit_value;
    ExperimentConfig cfg;

    if (auto r = kv.get("regime")) {
        if (*r == "toy") cfg.regime = Regime::Toy;
        else if (*r == "physical") cfg.regime = Regime::Physical;
        else throw ConfigError("regime must be 'toy' or 'physical'");
    }
    if (auto m = kv.get("mode")) {
        if (*m == "reduced") cfg.mode = SystemMode::Reduced4Plus2;
        else if (*m == "full") cfg.mode = SystemMode::Full8;
        else throw ConfigError("mode must be 'reduced' or 'full'");
    }

    cfg.params.e1 = unit_value(kv, "system.e1", detail::energy_units());
    cfg.params.ea = unit_value(kv, "system.ea", detail::energy_units());
    cfg.params.c3 = unit_value(kv, "system.c3", detail::energy_units());
    cfg.params.mu0 =
        unit_value(kv, "system.mu0", {{"au", 1.0}}, 1.0);
    cfg.mass = unit_value(kv, "system.mass", detail::mass_units());
    cfg.params.omega = unit_value(kv, "trap.omega", detail::omega_units());
    cfg.params.r0 = unit_value(kv, "trap.r0", detail::length_units());

    cfg.grid.r_min = unit_value(kv, "grid.r_min", detail::length_units());
    cfg.grid.r_max = unit_value(kv, "grid.r_max", detail::length_units());
    cfg.grid.n_points = static_cast<int>(
        unit_value(kv, "grid.n", {{"points", 1.0}}));
    cfg.grid.mass = cfg.mass;
    if (auto kind = kv.get("grid.kind")) {
        if (*kind == "uniform") cfg.grid.mapped = false;
        else if (*kind == "mapped") cfg.grid.mapped = true;
        else throw ConfigError("grid.kind must be 'uniform' or 'mapped'");
    }
    if (cfg.grid.mapped) {
        cfg.grid.beta = unit_value(kv, "grid.beta", {{"frac", 1.0}}, 0.5);
        cfg.grid.e_max = unit_value(kv, "grid.e_max", detail::energy_units());
    } else {
        (void)kv.get("grid.beta_frac");
        (void)kv.get("grid.e_max_au");
        (void)kv.get("grid.e_max_cm1");
    }

    cfg.duration = unit_value(kv, "time.duration", detail::time_units());
    cfg.dt = unit_value(kv, "time.dt", detail::time_units());

    cfg.carrier = unit_value(kv, "pulse.carrier", detail::energy_units(),
                             cfg.params.ea);
    cfg.detuning =
        unit_value(kv, "pulse.detuning", detail::energy_units(), 0.0);
    cfg.gate_phase =
        M_PI * unit_value(kv, "gate.phase", {{"over_pi", 1.0}}, 1.0);

    cfg.krotov.alpha = unit_value(kv, "krotov.alpha", {{"au", 1.0}}, 0.0);
    cfg.krotov.alpha_peak_fraction = unit_value(
        kv, "krotov.alpha_peak", {{"fraction", 1.0}}, 0.05);
    cfg.krotov.max_iterations = static_cast<int>(
        unit_value(kv, "krotov.max", {{"iterations", 1.0}}, 300.0));
    cfg.krotov.delta_f_stop =
        unit_value(kv, "krotov.delta_f", {{"stop", 1.0}}, 0.0);
    cfg.krotov.monotonicity_tolerance = unit_value(
        kv, "krotov.monotonicity", {{"tolerance", 1.0}}, 1e-9);
    cfg.krotov.storage_budget_bytes = static_cast<std::size_t>(unit_value(
        kv, "krotov.storage_budget", {{"mb", 1.0}}, 2048.0) * (1 << 20));

    cfg.propagator.tolerance =
        unit_value(kv, "propagator.tolerance", {{"abs", 1.0}}, 1e-12);
    cfg.propagator.max_order = static_cast<int>(
        unit_value(kv, "propagator.max", {{"order", 1.0}}, 10000.0));

    if (auto v = kv.get("sweep.variable")) {
        if (*v == "gate_time") cfg.sweep_variable = SweepVariable::GateTime;
        else if (*v == "c3") cfg.sweep_variable = SweepVariable::C3;
        else throw ConfigError("sweep.variable must be 'gate_time' or 'c3'");
        const auto& vu = cfg.sweep_variable == SweepVariable::GateTime
                             ? detail::time_units()
                             : detail::energy_units();
        std::optional<std::string> list;
        double factor = 1.0;
        for (const auto& [suffix, f] : vu) {
            if (auto text = kv.get("sweep.values_" + suffix)) {
                if (list)
                    throw ConfigError("sweep.values given in two units");
                list = text;
                factor = f;
            }
        }
        if (!list) throw ConfigError("sweep.variable set but no sweep.values");
        std::stringstream ss(*list);
        std::string item;
        while (std::getline(ss, item, ','))
            cfg.sweep_values.push_back(
                detail::to_double("sweep.values", item) * factor);
        if (cfg.sweep_values.size() < 2)
            throw ConfigError("sweep needs at least 2 values");
        for (size_t i = 1; i < cfg.sweep_values.size(); ++i)
            if (cfg.sweep_values[i] <= cfg.sweep_values[i - 1])
                throw ConfigError("sweep values must be strictly increasing");
    }

    cfg.trace_stride = static_cast<int>(
        unit_value(kv, "output.trace", {{"stride", 1.0}}, 10.0));
    cfg.eigen_states = static_cast<int>(
        unit_value(kv, "eigen.n", {{"states", 1.0}}, 10.0));
    if (auto c = kv.get("eigen.channel")) cfg.eigen_channel = *c;
    if (auto o = kv.get("output.dir")) cfg.output_dir = *o;
    if (auto p = kv.get("crosscheck.pulse_file")) cfg.pulse_file = *p;
    if (auto s = kv.get("seed"))
        cfg.seed = static_cast<std::uint64_t>(detail::to_double("seed", *s));
    if (auto w = kv.get("workers"))
        cfg.krotov.workers =
            static_cast<int>(detail::to_double("workers", *w));

    for (const auto& [key, value] : kv.entries)
        if (!kv.used.count(key))
            throw ConfigError("unknown config key '" + key + "'");

    // --- validation ---
    if (!(cfg.duration > 0.0) || !(cfg.dt > 0.0))
        throw ConfigError("time.duration and time.dt must be positive");
    const double steps = cfg.duration / cfg.dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * steps)
        throw ConfigError("time.duration must be an integer multiple of time.dt");
    if (cfg.grid.n_points < 8)
        throw ConfigError("grid.n_points must be at least 8");
    if (cfg.regime == Regime::Toy) {
        const double carrier_period =
            2.0 * M_PI / std::max(cfg.carrier + cfg.detuning, 1e-300);
        if (carrier_period < 20.0 * cfg.dt)
            throw ConfigError(
                "toy regime requires carrier period >= 20 dt "
                "(raise time.dt resolution or lower the carrier)");
        if (cfg.duration > 1e6 * cfg.dt)
            throw ConfigError("toy regime requires duration <= 1e6 dt");
    }
    if (cfg.params.c3 < 0.0)
        throw ConfigError("system.c3 must be non-negative");

    // Canonical hash over the sorted raw entries.
    std::string canon;
    for (const auto& [key, value] : kv.entries)
        canon += key + " = " + value + "\n";
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a(canon)));
    cfg.hash = buf;
    cfg.canonical_text = canon;
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

inline int config_steps(const ExperimentConfig& cfg) {
    return static_cast<int>(std::round(cfg.duration / cfg.dt));
}

// System factory: wires the parsed parameters into a channel system.  The
// mapped-grid envelope is the deepest potential (the interaction well), so
// the step-size budget covers every channel.
inline ChannelSystem build_system(const ExperimentConfig& cfg) {
    GridSpec gs = cfg.grid;
    gs.mass = cfg.mass;
    if (gs.mapped) {
        const double m = cfg.mass, w = cfg.params.omega, r0 = cfg.params.r0;
        const double c3 = cfg.params.c3;
        gs.envelope = [m, w, r0, c3](double r) {
            const double x = r - r0;
            return 0.5 * m * w * w * x * x - c3 / (r * r * r);
        };
    }
    return ChannelSystem(cfg.mode, cfg.params, gs);
}

}  // namespace phasegate
