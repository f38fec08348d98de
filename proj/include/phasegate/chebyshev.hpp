// Chebychev polynomial propagator for one channel block.
//
// A time step exp(-i H dt) is expanded in Chebychev polynomials of the
// Hamiltonian normalized to [-1, 1] over a precomputed spectral interval:
//     exp(-i H dt) = e^{-i Ec dt} sum_n (2 - d_n0) (-i)^n J_n(a) T_n(Hn),
// with Ec the interval center, a = (half-width) * dt, and J_n Bessel
// functions.  Coefficients fall off super-exponentially once n exceeds a,
// so the series is truncated where |2 J_n| stays below tolerance for three
// consecutive orders.  Backward steps conjugate the coefficients and the
// phase prefactor instead of re-deriving anything.
//
// The spectral interval covers the block's potential range, the grid's
// kinetic ceiling, and a field-coupling budget with headroom; if the
// optimizer pushes the field beyond the budget mid-sweep, the propagator
// transparently rebuilds its coefficients for a wider interval.
#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "phasegate/channels.hpp"
#include "phasegate/errors.hpp"
#include "phasegate/pulse.hpp"

namespace phasegate {

// J_0..J_nmax at x by Miller's downward recurrence (no external special-
// function dependency; stable for the x <= a few thousand used here).
inline std::vector<double> bessel_jn_array(int nmax, double x) {
    std::vector<double> j(nmax + 1, 0.0);
    if (x == 0.0) {
        j[0] = 1.0;
        return j;
    }
    const double ax = std::abs(x);
    // Start the downward recurrence far enough beyond the n ~ x turnover
    // that the contaminating (growing) solution is damped below 1e-16.
    const double turnover = std::max(static_cast<double>(nmax), ax);
    const int start = static_cast<int>(std::ceil(turnover)) + 40 +
                      static_cast<int>(std::ceil(12.0 * std::cbrt(turnover)));
    double jp = 0.0, jc = 1e-250;
    double sum = 0.0;
    for (int k = start; k >= 1; --k) {
        const double jm = (2.0 * k / ax) * jc - jp;
        jp = jc;
        jc = jm;
        if (k - 1 <= nmax) j[k - 1] = jc;
        if (((k - 1) & 1) == 0 && k - 1 > 0) sum += 2.0 * jc;
        if (std::abs(jc) > 1e250) {  // rescale to dodge overflow
            jp *= 1e-250;
            jc *= 1e-250;
            sum *= 1e-250;
            for (double& v : j) v *= 1e-250;
        }
    }
    sum += jc;  // J_0 contribution
    for (double& v : j) v /= sum;
    if (x < 0.0)
        for (int k = 1; k <= nmax; k += 2) j[k] = -j[k];
    return j;
}

struct PropagatorSpec {
    double dt = 0.0;            // atomic units
    double tolerance = 1e-12;   // truncation threshold on |2 J_n|
    int max_order = 10000;
    double range_pad = 0.05;    // widen the spectral interval by 5%
    double field_headroom = 1.2;  // budget = headroom * max |field|
};

class BlockPropagator {
  public:
    BlockPropagator(const ChannelSystem& sys, const ChannelBlock& block,
                    const PropagatorSpec& spec, double max_field)
        : sys_(&sys), block_(&block), spec_(spec) {
        if (!(spec.dt > 0.0)) throw ConfigError("propagator needs dt > 0");
        if (!block.is_tls)
            ws_.emplace(sys.grid, static_cast<int>(block.potentials.cols()));
        rebuild(spec_.field_headroom * std::abs(max_field));
    }

    double field_budget() const { return budget_; }
    int order() const { return order_; }
    int rebuild_count() const { return rebuilds_; }

    // Widen (never narrow) the spectral interval for fields up to |budget|.
    void rebuild(double budget) {
        budget_ = budget;
        const SpectralBounds b = block_spectral_bounds(*sys_, *block_, budget_);
        ec_ = 0.5 * (b.e_max + b.e_min);
        half_ = 0.5 * (b.e_max - b.e_min) * (1.0 + spec_.range_pad);
        if (!(half_ > 0.0)) half_ = 1e-30;
        const double alpha = half_ * spec_.dt;
        // Series length: past the Bessel turnover plus a decay margin.
        const int need = static_cast<int>(std::ceil(
            alpha + 30.0 + 20.0 * std::cbrt(alpha + 1.0)));
        if (need > spec_.max_order)
            throw NumericalError(
                "propagator series will not converge within max_order (needs ~" +
                std::to_string(need) + " terms)");
        const std::vector<double> jn = bessel_jn_array(need, alpha);
        order_ = -1;
        for (int n = 0; n + 2 < static_cast<int>(jn.size()); ++n) {
            if (2.0 * std::abs(jn[n]) < spec_.tolerance &&
                2.0 * std::abs(jn[n + 1]) < spec_.tolerance &&
                2.0 * std::abs(jn[n + 2]) < spec_.tolerance) {
                order_ = n + 2;
                break;
            }
        }
        if (order_ < 0)
            throw NumericalError(
                "propagator series failed to reach tolerance " +
                std::to_string(spec_.tolerance));
        coeff_.resize(order_ + 1);
        const std::complex<double> mi(0.0, -1.0);
        std::complex<double> rot(1.0, 0.0);
        for (int n = 0; n <= order_; ++n) {
            coeff_[n] = (n == 0 ? 1.0 : 2.0) * rot * jn[n];
            rot *= mi;
        }
        phase_ = std::exp(std::complex<double>(0.0, -ec_ * spec_.dt));
        ++rebuilds_;
    }

    // One step of exp(-i H(field) dt) (direction=+1) or its inverse
    // (direction=-1), in place.
    void step(Eigen::MatrixXcd& state, double field, int direction) {
        if (std::abs(field) > budget_) rebuild(1.5 * std::abs(field));
        const bool fwd = direction >= 0;
        t0_ = state;
        apply_hnorm_(t0_, t1_, field);
        acc_ = pick_(0, fwd) * t0_ + pick_(1, fwd) * t1_;
        for (int n = 2; n <= order_; ++n) {
            apply_hnorm_(t1_, t2_, field);
            t2_ = 2.0 * t2_ - t0_;
            acc_ += pick_(n, fwd) * t2_;
            t0_.swap(t1_);
            t1_.swap(t2_);
        }
        state = (fwd ? phase_ : std::conj(phase_)) * acc_;
    }

  private:
    std::complex<double> pick_(int n, bool fwd) const {
        return fwd ? coeff_[n] : std::conj(coeff_[n]);
    }

    // out = (H(field) - Ec)/half * in
    void apply_hnorm_(const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out,
                      double field) {
        apply_block_h(*sys_, *block_, in, out,
                      field, ws_ ? &*ws_ : nullptr);
        out -= ec_ * in;
        out /= half_;
    }

    const ChannelSystem* sys_;
    const ChannelBlock* block_;
    PropagatorSpec spec_;
    std::optional<KineticWorkspace> ws_;
    double budget_ = 0.0, ec_ = 0.0, half_ = 0.0;
    int order_ = 0, rebuilds_ = -1;  // first rebuild() is construction
    std::vector<std::complex<double>> coeff_;
    std::complex<double> phase_;
    Eigen::MatrixXcd t0_, t1_, t2_, acc_;
};

// Propagate a block state across the whole pulse (direction=+1: t=0 -> T
// over samples k = 0..n-1; direction=-1: T -> 0 in reverse order).  The
// callback, when given, sees the state at every node time k*dt including
// both endpoints.  Norm is monitored; drift beyond 1e-6 aborts the run.
inline void propagate_block(
    const ChannelSystem& sys, const ChannelBlock& block, BlockPropagator& prop,
    Eigen::MatrixXcd& state, const ControlField& field, int direction,
    const std::function<void(int node, const Eigen::MatrixXcd&)>& on_node =
        nullptr) {
    const int nt = field.n_steps;
    const double norm0 = block_norm(sys, block, state);
    if (direction >= 0) {
        if (on_node) on_node(0, state);
        for (int k = 0; k < nt; ++k) {
            prop.step(state, field.amplitude[k], +1);
            if (on_node) on_node(k + 1, state);
        }
    } else {
        if (on_node) on_node(nt, state);
        for (int k = nt - 1; k >= 0; --k) {
            prop.step(state, field.amplitude[k], -1);
            if (on_node) on_node(k, state);
        }
    }
    const double drift = std::abs(block_norm(sys, block, state) - norm0);
    if (drift > 1e-6)
        throw NumericalError("propagation norm drift " + std::to_string(drift) +
                             " exceeds 1e-6; spectral range or dt unsound");
}

}  // namespace phasegate
