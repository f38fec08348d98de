// Thin RAII layer over FFTW3 for the spectral derivatives.
//
// FFTW plan creation/destruction is not thread-safe, so both go through one
// global mutex; fftw_execute_dft on private buffers is safe and is what the
// per-worker propagation loops call.  Plans use FFTW_ESTIMATE|FFTW_UNALIGNED
// so they apply to any buffer (Eigen does not guarantee SIMD alignment for
// matrix columns) and so planning is deterministic and cheap.
#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace phasegate {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Batched 1-D complex transforms: `howmany` contiguous signals of length n
// (exactly the column-major layout of an Eigen n x howmany complex matrix).
class Fft {
  public:
    Fft(int n, int howmany) : n_(n), howmany_(howmany) {
        if (n < 2 || howmany < 1) throw std::invalid_argument("bad fft size");
        std::vector<std::complex<double>> scratch(
            static_cast<size_t>(n) * howmany);
        auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
        const int dims[1] = {n};
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        forward_ = fftw_plan_many_dft(1, dims, howmany, buf, nullptr, 1, n,
                                      buf, nullptr, 1, n, FFTW_FORWARD, flags);
        backward_ = fftw_plan_many_dft(1, dims, howmany, buf, nullptr, 1, n,
                                       buf, nullptr, 1, n, FFTW_BACKWARD, flags);
        if (!forward_ || !backward_) throw std::runtime_error("fftw planning failed");
    }

    ~Fft() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        if (forward_) fftw_destroy_plan(forward_);
        if (backward_) fftw_destroy_plan(backward_);
    }

    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;

    Fft(Fft&& other) noexcept
        : n_(other.n_), howmany_(other.howmany_),
          forward_(std::exchange(other.forward_, nullptr)),
          backward_(std::exchange(other.backward_, nullptr)) {}

    Fft& operator=(Fft&& other) noexcept {
        if (this != &other) {
            {
                std::lock_guard<std::mutex> lock(fftw_planner_mutex());
                if (forward_) fftw_destroy_plan(forward_);
                if (backward_) fftw_destroy_plan(backward_);
            }
            n_ = other.n_;
            howmany_ = other.howmany_;
            forward_ = std::exchange(other.forward_, nullptr);
            backward_ = std::exchange(other.backward_, nullptr);
        }
        return *this;
    }

    // In-place, unnormalized (backward picks up a factor n; callers divide).
    void forward(std::complex<double>* data) const {
        auto* buf = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(forward_, buf, buf);
    }
    void backward(std::complex<double>* data) const {
        auto* buf = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(backward_, buf, buf);
    }

    int size() const { return n_; }
    int batch() const { return howmany_; }

  private:
    int n_, howmany_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

// DFT sample wavenumbers 2*pi*k/(n*dx) in FFTW ordering, with the Nyquist
// mode kept (assigned the negative branch, -pi/dx, for even n).  The Nyquist
// mode must stay in the first-derivative stencil: dropping it leaves a
// sawtooth vector that the kinetic operator annihilates, which shows up as a
// spurious low-energy bound state on mapped grids.
inline Eigen::VectorXd dft_wavenumbers(int n, double dx) {
    Eigen::VectorXd k(n);
    const double base = 2.0 * M_PI / (n * dx);
    for (int i = 0; i < (n + 1) / 2; ++i) k[i] = base * i;
    for (int i = (n + 1) / 2; i < n; ++i) k[i] = base * (i - n);
    return k;
}

}  // namespace phasegate
