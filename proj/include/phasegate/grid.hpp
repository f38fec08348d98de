// Spatial discretization: uniform and mapped Fourier grids on [r_min, r_max].
//
// Both variants put the n sample points at cell midpoints and apply the
// kinetic operator spectrally (periodic FFT stencil).  The mapped variant
// spaces points by the local de Broglie wavelength of a chosen energy
// ceiling: step s(R) = beta*pi / sqrt(2 m (E_max - V_env(R))), clamped below
// by eps_floor where the envelope exceeds the ceiling.  Points follow from
// inverting the cumulative step count x(R) = int dR'/s(R') on a fine
// auxiliary mesh; x(r_max) is the number of grid points actually required,
// and asking for fewer is a configuration error rather than a silent
// accuracy loss.
//
// Kinetic operator on a mapped grid, acting on amplitudes psi(R_k): with
// J = dR/du (u the unit computational coordinate) and D the spectral
// first derivative on the u lattice,
//     T = -(1/2m) J^{-1/2} [ J^{-1/2} D J^{-1} D J^{-1/2} ] J^{1/2}
//       = -(1/2m) J^{-1} D J^{-1} D,
// i.e. the chain-rule Laplacian, Hermitian under the J/n quadrature weights.
// D keeps its Nyquist row: zeroing it leaves a sawtooth vector with no
// kinetic penalty that intrudes into the bound spectrum.
#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phasegate/errors.hpp"
#include "phasegate/fft.hpp"

namespace phasegate {

struct GridSpec {
    double r_min = 0.0;               // bohr
    double r_max = 0.0;               // bohr
    int n_points = 0;
    double mass = 1.0;                // electron masses (reduced mass)
    bool mapped = false;
    double beta = 0.5;                // mapped: fraction of the Nyquist step
    double e_max = 0.0;               // mapped: energy ceiling, hartree
    std::function<double(double)> envelope;  // mapped: V_env(R), hartree
    double eps_floor = 1.0e-12;       // mapped: clamp for E_max - V_env
    int fine_factor = 64;             // mapped: auxiliary mesh refinement
};

class SpatialGrid {
  public:
    explicit SpatialGrid(const GridSpec& spec) : spec_(spec) {
        if (spec.n_points < 2)
            throw ConfigError("grid needs at least 2 points");
        if (!(spec.r_max > spec.r_min))
            throw ConfigError("grid requires r_max > r_min");
        if (!(spec.mass > 0.0)) throw ConfigError("grid mass must be positive");
        if (spec.mapped)
            build_mapped_();
        else
            build_uniform_();
    }

    const GridSpec& spec() const { return spec_; }
    int n() const { return spec_.n_points; }
    double mass() const { return spec_.mass; }
    bool mapped() const { return spec_.mapped; }
    const Eigen::VectorXd& points() const { return points_; }
    const Eigen::VectorXd& jacobian() const { return jacobian_; }
    // Quadrature weights for psi amplitudes: <a|b> = sum_k w_k conj(a_k) b_k.
    const Eigen::VectorXd& weights() const { return weights_; }
    // Number of points the mapped construction needed (<= n by construction).
    double points_required() const { return points_required_; }

    std::complex<double> inner(const Eigen::VectorXcd& a,
                               const Eigen::VectorXcd& b) const {
        return (a.conjugate().cwiseProduct(b).cwiseProduct(
                    weights_.cast<std::complex<double>>()))
            .sum();
    }

    double norm(const Eigen::VectorXcd& a) const {
        return std::sqrt((a.cwiseAbs2().cwiseProduct(weights_)).sum());
    }

    double norm(const Eigen::MatrixXcd& channels) const {
        double s = 0.0;
        for (int c = 0; c < channels.cols(); ++c)
            s += (channels.col(c).cwiseAbs2().cwiseProduct(weights_)).sum();
        return std::sqrt(s);
    }

  private:
    void build_uniform_() {
        const int n = spec_.n_points;
        const double length = spec_.r_max - spec_.r_min;
        const double dr = length / n;
        points_.resize(n);
        for (int k = 0; k < n; ++k)
            points_[k] = spec_.r_min + (k + 0.5) * dr;
        jacobian_ = Eigen::VectorXd::Constant(n, length);
        weights_ = Eigen::VectorXd::Constant(n, dr);
        points_required_ = n;
        kin_mult_ = dft_wavenumbers(n, dr).array().square() / (2.0 * spec_.mass);
    }

    double local_step_(double r) const {
        const double gap =
            std::max(spec_.e_max - spec_.envelope(r), spec_.eps_floor);
        return spec_.beta * M_PI / std::sqrt(2.0 * spec_.mass * gap);
    }

    void build_mapped_() {
        if (!spec_.envelope)
            throw ConfigError("mapped grid requires an envelope potential");
        if (!(spec_.beta > 0.0))
            throw ConfigError("mapped grid requires beta > 0");
        const int n = spec_.n_points;
        const long nf = static_cast<long>(spec_.fine_factor) * n;
        const double drf = (spec_.r_max - spec_.r_min) / nf;
        // Cumulative step count x(R) by trapezoid rule on the fine mesh.
        std::vector<double> x(nf + 1), rf(nf + 1);
        double prev_inv = 1.0 / local_step_(spec_.r_min);
        rf[0] = spec_.r_min;
        x[0] = 0.0;
        for (long i = 1; i <= nf; ++i) {
            rf[i] = spec_.r_min + i * drf;
            const double inv = 1.0 / local_step_(rf[i]);
            x[i] = x[i - 1] + 0.5 * (inv + prev_inv) * drf;
            prev_inv = inv;
        }
        points_required_ = x.back();
        if (static_cast<double>(n) < points_required_)
            throw ConfigError(
                "mapped grid cannot resolve e_max over the box: needs " +
                std::to_string(points_required_) + " points, n_points is " +
                std::to_string(n) + " (increase n_points or lower e_max)");
        // Invert x(R) at the midpoint lattice xi_k = (k+1/2) X/n.
        points_.resize(n);
        jacobian_.resize(n);
        const double X = points_required_;
        long hi = 1;
        for (int k = 0; k < n; ++k) {
            const double xi = (k + 0.5) * X / n;
            while (hi < nf && x[hi] < xi) ++hi;
            const double t = (xi - x[hi - 1]) / (x[hi] - x[hi - 1]);
            points_[k] = rf[hi - 1] + t * (rf[hi] - rf[hi - 1]);
            jacobian_[k] = X * local_step_(points_[k]);
        }
        weights_ = jacobian_ / n;
        ku_ = dft_wavenumbers(n, 1.0 / n);
        inv_j_ = jacobian_.cwiseInverse();
    }

    friend class KineticWorkspace;

    GridSpec spec_;
    Eigen::VectorXd points_, jacobian_, weights_;
    double points_required_ = 0.0;
    Eigen::VectorXd kin_mult_;  // uniform: k^2/2m on the R lattice
    Eigen::VectorXd ku_;        // mapped: wavenumbers on the unit u lattice
    Eigen::VectorXd inv_j_;     // mapped: 1/J
};

// Owns the FFT plans and scratch needed to apply the kinetic operator to a
// fixed number of channel columns.  One instance per worker thread.
class KineticWorkspace {
  public:
    KineticWorkspace(const SpatialGrid& grid, int n_cols)
        : fft_(grid.n(), n_cols), buf_(grid.n(), n_cols) {}

    int cols() const { return buf_.cols(); }

    // out = T in, both n x n_cols in the psi representation.
    void apply(const SpatialGrid& g, const Eigen::MatrixXcd& in,
               Eigen::MatrixXcd& out) {
        const int n = g.n();
        if (in.rows() != n || in.cols() != fft_.batch())
            throw std::invalid_argument("kinetic workspace shape mismatch");
        const double inv_n = 1.0 / n;
        buf_ = in;
        if (!g.mapped()) {
            fft_.forward(buf_.data());
            buf_.array().colwise() *=
                (g.kin_mult_ * inv_n).array().cast<std::complex<double>>();
            fft_.backward(buf_.data());
            out = buf_;
            return;
        }
        const std::complex<double> i1(0.0, 1.0);
        const Eigen::ArrayXcd ik = i1 * g.ku_.array().cast<std::complex<double>>();
        fft_.forward(buf_.data());
        buf_.array().colwise() *= ik * inv_n;
        fft_.backward(buf_.data());  // buf = d/du in
        buf_.array().colwise() *= g.inv_j_.array().cast<std::complex<double>>();
        fft_.forward(buf_.data());
        buf_.array().colwise() *= ik * inv_n;
        fft_.backward(buf_.data());  // buf = d/du (J^-1 d/du in)
        const double pref = -0.5 / g.mass();
        out = buf_;
        out.array().colwise() *=
            (pref * g.inv_j_.array()).cast<std::complex<double>>();
    }

  private:
    Fft fft_;
    Eigen::MatrixXcd buf_;
};

struct BoundStates {
    Eigen::VectorXd energies;   // hartree, ascending
    Eigen::MatrixXcd states;    // psi amplitudes, unit norm under grid weights
};

// Dense diagonalization of T + diag(potential).  Work happens in the
// phi = J^{1/2} psi representation where the operator is Hermitian under the
// plain dot product; uniform grids reduce to a real symmetric problem.
inline BoundStates solve_bound_states(const SpatialGrid& grid,
                                      const Eigen::VectorXd& potential,
                                      int n_states) {
    const int n = grid.n();
    if (potential.size() != n)
        throw ConfigError("potential length does not match grid");
    if (n_states < 1 || n_states > n)
        throw ConfigError("n_states out of range for bound-state solve");

    KineticWorkspace ws(grid, n);
    Eigen::MatrixXcd columns = Eigen::MatrixXcd::Zero(n, n);
    if (grid.mapped()) {
        // Column j of T in the phi representation: T_phi e_j, obtained by
        // sandwiching the psi-space operator with J^{+-1/2}.
        const Eigen::VectorXd inv_sqrt_j = grid.jacobian().cwiseSqrt().cwiseInverse();
        Eigen::MatrixXcd unit = Eigen::MatrixXcd::Zero(n, n);
        unit.diagonal() = inv_sqrt_j.cast<std::complex<double>>();
        ws.apply(grid, unit, columns);
        columns.array().colwise() *=
            grid.jacobian().cwiseSqrt().array().cast<std::complex<double>>();
    } else {
        Eigen::MatrixXcd unit = Eigen::MatrixXcd::Identity(n, n);
        ws.apply(grid, unit, columns);
    }

    BoundStates out;
    if (grid.mapped()) {
        Eigen::MatrixXcd h = columns;
        h.diagonal() += potential.cast<std::complex<double>>();
        h = 0.5 * (h + h.adjoint()).eval();  // symmetrize roundoff
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
        if (solver.info() != Eigen::Success)
            throw NumericalError("bound-state diagonalization failed");
        out.energies = solver.eigenvalues().head(n_states);
        // phi -> psi and renormalize under the quadrature weights.
        Eigen::MatrixXcd vec = solver.eigenvectors().leftCols(n_states);
        vec.array().colwise() /=
            grid.jacobian().cwiseSqrt().array().cast<std::complex<double>>();
        out.states = vec * std::sqrt(static_cast<double>(n));
    } else {
        Eigen::MatrixXd h = columns.real();
        h.diagonal() += potential;
        h = 0.5 * (h + h.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
        if (solver.info() != Eigen::Success)
            throw NumericalError("bound-state diagonalization failed");
        out.energies = solver.eigenvalues().head(n_states);
        const double dr = grid.weights()[0];
        out.states =
            (solver.eigenvectors().leftCols(n_states) / std::sqrt(dr))
                .cast<std::complex<double>>();
    }
    // Deterministic gauge: largest-magnitude component real and positive.
    for (int c = 0; c < out.states.cols(); ++c) {
        int imax = 0;
        out.states.col(c).cwiseAbs().maxCoeff(&imax);
        const std::complex<double> z = out.states.col(c)[imax];
        if (std::abs(z) > 0.0) out.states.col(c) *= std::conj(z) / std::abs(z);
    }
    return out;
}

}  // namespace phasegate
