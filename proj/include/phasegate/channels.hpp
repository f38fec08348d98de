// Electronic channel structure for two trapped atoms in relative coordinates.
//
// Each atom carries three levels: qubit states |0>, |1> and an auxiliary
// excited state |a> reached by the control field.  Two-atom products map to
// propagation channels over the internuclear coordinate R.  The field only
// drives 0 <-> a on either atom (constant transition dipole mu0), so the
// channels split into blocks that never talk to each other:
//
//   {00, 0a, a0, aa}   both atoms outside |1>; carries the resonant
//                      dipole-dipole well -C3/R^3 on the singly excited pair
//   {01, a1}, {10, 1a} one atom parked in |1>, a pure two-level ladder
//                      dressed by the trap
//   {11}               dark; its phase evolution is analytic and is folded
//                      into the fidelity as a constant
//
// The reduced description keeps the {00,...} block on the grid and replaces
// the {01, a1} ladder by a motion-free two-level system |0>, |a> whose
// fidelity target absorbs the analytically known vibrational phase.
//
// All channels share the same trap 0.5 m w^2 (R - r0)^2; electronic offsets
// add e1 per atom in |1> and ea per atom in |a>.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "phasegate/errors.hpp"
#include "phasegate/grid.hpp"

namespace phasegate {

enum class SystemMode { Full8, Reduced4Plus2 };

struct SystemParams {
    double e1 = 0.0;     // |1> offset per atom (hartree)
    double ea = 0.0;     // |a> offset per atom (hartree)
    double c3 = 0.0;     // resonant dipole-dipole coefficient (hartree bohr^3)
    double mu0 = 1.0;    // 0<->a transition dipole (atomic units)
    double omega = 0.0;  // trap angular frequency (atomic units)
    double r0 = 0.0;     // trap equilibrium separation (bohr)
};

// One independently propagated set of channels.  Grid blocks hold an
// n x m column stack; the two-level block reuses the same container with
// two rows and no spatial structure.
struct ChannelBlock {
    std::string name;                 // initial basis label: "00", "01", ...
    std::vector<std::string> labels;  // channel labels, one per column
    bool is_tls = false;
    Eigen::MatrixXd potentials;       // n x m (grid) or 2 x 1 levels (tls)
    std::vector<std::pair<int, int>> couplings;  // field-coupled column pairs
    int start_column = 0;             // column populated at t = 0
    // Largest |off-diagonal row sum| of the dipole pattern; bounds the
    // spectral widening caused by the field.
    double coupling_degree = 0.0;
};

struct ChannelSystem {
    SystemMode mode = SystemMode::Reduced4Plus2;
    SystemParams params;
    SpatialGrid grid;
    std::vector<ChannelBlock> blocks;
    Eigen::VectorXcd motional_ground;  // trap ground state (psi amplitudes)
    double e_vib0 = 0.0;               // its energy (hartree)

    ChannelSystem(SystemMode m, const SystemParams& p, const GridSpec& gs)
        : mode(m), params(p), grid(gs) {
        build_();
    }

  private:
    void build_();
};

inline double trap_potential(const ChannelSystem& sys, double r) {
    const double x = r - sys.params.r0;
    return 0.5 * sys.grid.mass() * sys.params.omega * sys.params.omega * x * x;
}

inline void ChannelSystem::build_() {
    if (!(params.mu0 > 0.0)) throw ConfigError("mu0 must be positive");
    if (!(params.omega > 0.0)) throw ConfigError("trap omega must be positive");
    const int n = grid.n();

    Eigen::VectorXd trap(n);
    for (int k = 0; k < n; ++k) trap[k] = trap_potential(*this, grid.points()[k]);

    BoundStates ground = solve_bound_states(grid, trap, 1);
    motional_ground = ground.states.col(0);
    e_vib0 = ground.energies[0];

    auto electronic_offset = [this](char c) {
        switch (c) {
            case '0': return 0.0;
            case '1': return params.e1;
            case 'a': return params.ea;
        }
        throw ConfigError("unknown electronic label");
    };
    auto column_potential = [&](const std::string& label) {
        Eigen::VectorXd v = trap;
        v.array() += electronic_offset(label[0]) + electronic_offset(label[1]);
        if (label == "0a" || label == "a0")
            v.array() -= params.c3 * grid.points().array().pow(-3);
        return v;
    };
    auto grid_block = [&](std::string name, std::vector<std::string> labels,
                          std::vector<std::pair<int, int>> couplings,
                          double degree) {
        ChannelBlock b;
        b.name = std::move(name);
        b.labels = std::move(labels);
        b.potentials.resize(n, static_cast<int>(b.labels.size()));
        for (int c = 0; c < b.potentials.cols(); ++c)
            b.potentials.col(c) = column_potential(b.labels[c]);
        b.couplings = std::move(couplings);
        b.coupling_degree = degree;
        return b;
    };

    blocks.push_back(grid_block("00", {"00", "0a", "a0", "aa"},
                                {{0, 1}, {0, 2}, {1, 3}, {2, 3}}, 2.0));
    if (mode == SystemMode::Full8) {
        blocks.push_back(grid_block("01", {"01", "a1"}, {{0, 1}}, 1.0));
        blocks.push_back(grid_block("10", {"10", "1a"}, {{0, 1}}, 1.0));
    } else {
        ChannelBlock tls;
        tls.name = "tls0";
        tls.labels = {"0", "a"};
        tls.is_tls = true;
        tls.potentials.resize(2, 1);
        tls.potentials(0, 0) = 0.0;
        tls.potentials(1, 0) = params.ea;
        tls.couplings = {{0, 1}};
        tls.coupling_degree = 1.0;
        blocks.push_back(tls);
    }
}

// out = H(field) in for one block.  Grid blocks need a kinetic workspace
// whose batch width matches the block's column count.
inline void apply_block_h(const ChannelSystem& sys, const ChannelBlock& block,
                          const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out,
                          double field, KineticWorkspace* ws) {
    const double g = field * sys.params.mu0;
    if (block.is_tls) {
        out.resize(2, 1);
        out(0, 0) = block.potentials(0, 0) * in(0, 0) + g * in(1, 0);
        out(1, 0) = block.potentials(1, 0) * in(1, 0) + g * in(0, 0);
        return;
    }
    ws->apply(sys.grid, in, out);
    out.array() += block.potentials.array() * in.array();
    for (const auto& [i, j] : block.couplings) {
        out.col(i) += g * in.col(j);
        out.col(j) += g * in.col(i);
    }
}

// out = dH/dfield in: the bare dipole pattern times mu0.
inline void apply_block_dipole(const ChannelSystem& sys,
                               const ChannelBlock& block,
                               const Eigen::MatrixXcd& in,
                               Eigen::MatrixXcd& out) {
    out.resizeLike(in);
    out.setZero();
    if (block.is_tls) {
        out(0, 0) = sys.params.mu0 * in(1, 0);
        out(1, 0) = sys.params.mu0 * in(0, 0);
        return;
    }
    for (const auto& [i, j] : block.couplings) {
        out.col(i) += sys.params.mu0 * in.col(j);
        out.col(j) += sys.params.mu0 * in.col(i);
    }
}

inline std::complex<double> block_inner(const ChannelSystem& sys,
                                        const ChannelBlock& block,
                                        const Eigen::MatrixXcd& a,
                                        const Eigen::MatrixXcd& b) {
    if (block.is_tls) return (a.conjugate().cwiseProduct(b)).sum();
    std::complex<double> s = 0.0;
    for (int c = 0; c < a.cols(); ++c)
        s += sys.grid.inner(a.col(c), b.col(c));
    return s;
}

inline double block_norm(const ChannelSystem& sys, const ChannelBlock& block,
                         const Eigen::MatrixXcd& a) {
    if (block.is_tls) return a.norm();
    return sys.grid.norm(a);
}

// Per-channel populations of one block state.
inline Eigen::VectorXd block_populations(const ChannelSystem& sys,
                                         const ChannelBlock& block,
                                         const Eigen::MatrixXcd& a) {
    if (block.is_tls)
        return a.cwiseAbs2().real().col(0);
    Eigen::VectorXd p(a.cols());
    for (int c = 0; c < a.cols(); ++c)
        p[c] = a.col(c).cwiseAbs2().cwiseProduct(sys.grid.weights()).sum();
    return p;
}

// Initial state of a block: the motional ground state (or |0> for the
// two-level block) in the block's start column.
inline Eigen::MatrixXcd block_initial_state(const ChannelSystem& sys,
                                            const ChannelBlock& block) {
    if (block.is_tls) {
        Eigen::MatrixXcd s(2, 1);
        s << 1.0, 0.0;
        return s;
    }
    Eigen::MatrixXcd s =
        Eigen::MatrixXcd::Zero(sys.grid.n(), block.potentials.cols());
    s.col(block.start_column) = sys.motional_ground;
    return s;
}

// Spectral interval of H over a block for fields up to |field| <= budget,
// used to normalize the propagator's polynomial recursion.
struct SpectralBounds {
    double e_min = 0.0, e_max = 0.0;
};

inline SpectralBounds block_spectral_bounds(const ChannelSystem& sys,
                                            const ChannelBlock& block,
                                            double field_budget) {
    const double coupling =
        block.coupling_degree * sys.params.mu0 * std::abs(field_budget);
    if (block.is_tls) {
        return {block.potentials.minCoeff() - coupling,
                block.potentials.maxCoeff() + coupling};
    }
    double t_max;
    if (sys.grid.mapped()) {
        const double k_u = M_PI * sys.grid.n();  // u-lattice Nyquist
        const double j_min = sys.grid.jacobian().minCoeff();
        t_max = (k_u / j_min) * (k_u / j_min) / (2.0 * sys.grid.mass());
    } else {
        const double dr = sys.grid.weights()[0];
        t_max = (M_PI / dr) * (M_PI / dr) / (2.0 * sys.grid.mass());
    }
    return {block.potentials.minCoeff() - coupling,
            block.potentials.maxCoeff() + t_max + coupling};
}

}  // namespace phasegate
