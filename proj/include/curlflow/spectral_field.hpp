#pragma once

// Spectral synthesis of the divergence-free Gaussian drift on a periodic
// torus.  Modes live on the lattice k = m/M, 0 < |m| <= M; the per-mode
// covariance is
//     amp(k) (id - k* k*/|k|^2),   amp(k) = C ens_eps^2 |k|^{2-n} M^{-n},
// where C is calibrated at the working M so the full mode sum reproduces
// E|b|^2 = eps^2 n/4 exactly.  Scale shells (L_lo, L_hi] hold the modes with
// 1/L_hi < |k| <= 1/L_lo; disjoint shells are independent by construction.
//
// Gauge machinery (stream tensor, flux corrector) and the corrector driver
// d(phi) = lambda^{-1} |k|^{-2} d(b) act per mode on shell fields.

#include <array>
#include <complex>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "curlflow/rng.hpp"
#include "curlflow/scale_ladder.hpp"

namespace curlflow {

using cplx = std::complex<double>;

struct EmptyShellError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TorusGrid {
    int n = 2;           // spatial dimension (2 or 3)
    int M = 64;          // wavevector resolution; modes m in Z^n, |m| <= M
    int real_points = 0; // per-axis sample count, default 4M

    TorusGrid() = default;
    TorusGrid(int n_, int M_, int real_points_ = 0);

    double period() const { return 6.283185307179586476925286766559 * M; }
    double cov_constant(double epsilon) const { return cov_const_ * epsilon * epsilon; }
    // amp(k) for integer mode m (|m|^2 = m2), including the M^{-n} measure.
    double mode_amp(double epsilon, int64_t m2) const;

private:
    double cov_const_ = 0.0;  // C * M^{-n} folded scaling, see .cpp
    double shape_pow_ = 0.0;
};

enum class FieldRank { Vector, SkewTensor, SkewPerCoord };

// Fourier coefficients restricted to a spherical mode shell.  All modes of
// the shell are stored; Hermitian symmetry coeff(-m) = conj(coeff(m)) holds
// by construction.  Component counts: Vector n, SkewTensor n^2,
// SkewPerCoord n^3 (slowest index = coordinate i).
struct SpectralShellField {
    TorusGrid grid;
    double L_lo = 1.0, L_hi = 1.0;
    FieldRank rank = FieldRank::Vector;
    int ncomp = 0;
    std::vector<std::array<int, 3>> modes;  // unused trailing index = 0
    std::vector<cplx> coeffs;               // [mode * ncomp + comp]

    cplx* at(std::size_t mode) { return coeffs.data() + mode * ncomp; }
    const cplx* at(std::size_t mode) const { return coeffs.data() + mode * ncomp; }
    double kvec(std::size_t mode, int axis) const {
        return static_cast<double>(modes[mode][axis]) / grid.M;
    }
    double k2(std::size_t mode) const;
};

// Integer modes with (M/L_hi)^2 < |m|^2 <= (M/L_lo)^2, deterministic order.
std::vector<std::array<int, 3>> shell_modes(const TorusGrid& grid, double L_lo, double L_hi);

// Gaussian shell increment of the drift; divergence-free per mode.
SpectralShellField sample_shell_increment(const TorusGrid& grid, const ScaleLadder& ladder,
                                          std::size_t level, RngStream& rng);
// Same, for an arbitrary shell (L_lo, L_hi]; used for b_L truncations.
SpectralShellField sample_shell(const TorusGrid& grid, double epsilon, double L_lo,
                                double L_hi, RngStream& rng);

// Coulomb-gauge stream increment: per mode (i/|k|^2)(k* x Fdb - Fdb x k*),
// skew, with div . dPsi = db per mode.
SpectralShellField stream_increment(const SpectralShellField& db);

// Corrector driver: d(phi)(k) = lambda^{-1} |k|^{-2} db(k); divergence-free.
SpectralShellField corrector_increment(const SpectralShellField& db, double lambda);

// Flux-corrector increment: Coulomb gauge applied per coordinate i to
// w^i = dPsi e^i + lambda grad(dphi^i); skew per mode and per i, with
// div . dsigma^i = w^i per mode.
SpectralShellField sigma_increment(const SpectralShellField& db, double lambda);

// Deterministic shell sums -------------------------------------------------

// sum over shell modes of amp * (n-1)            -> E |db|^2
double shell_variance(const TorusGrid& grid, double epsilon, double L_lo, double L_hi);
// sum over shell modes of amp * (n-1) / |k|^2    -> tr E grad dphi (grad dphi)^*
// before the lambda^{-2} factor
double shell_qv_trace(const TorusGrid& grid, double epsilon, double L_lo, double L_hi);
// E |dPsi|^2 over the shell
double shell_psi_variance(const TorusGrid& grid, double epsilon, double L_lo, double L_hi);

// Covariation tensor d[(d_j phi^i) Psi^{lm}] of one shell, deterministic:
//   c[i][j](l,m) = sum_k amp k_j |k|^{-4} lambda^{-1} (k_l P^{im} - P^{il} k_m).
// Returned flattened as c[((i*n + j)*n + l)*n + m].
std::vector<double> phi_psi_covariation(const TorusGrid& grid, double epsilon,
                                        double lambda, double L_lo, double L_hi);

// Real-space fields ----------------------------------------------------------

struct RealField {
    TorusGrid grid;
    int ncomp = 0;
    std::vector<double> data;  // [comp][z][y][x] row-major per component

    double* comp(int c) { return data.data() + static_cast<std::size_t>(c) * points(); }
    const double* comp(int c) const {
        return data.data() + static_cast<std::size_t>(c) * points();
    }
    std::size_t points() const;
    double axis_coord(int idx) const {
        return period_over_N_ * idx;
    }
    double period_over_N_ = 0.0;
};

// Inverse transform onto the oversampled grid.  Checks Hermitian symmetry
// and that the imaginary residue is < 1e-10 of the field RMS.
RealField synthesize_realspace(const SpectralShellField& field);
// Gradient channels d_axis applied spectrally before synthesis.
RealField synthesize_gradient(const SpectralShellField& field, int axis);

// Direct spectral evaluation at arbitrary points (trig-exact).
void evaluate_at(const SpectralShellField& field, const double* point,
                 double* out /* ncomp */);
// Gradient of a Vector field at a point: out[i*n+j] = d_j f^i.
void evaluate_gradient_at(const SpectralShellField& field, const double* point,
                          double* out /* n*n */);

// Verification helpers.
double max_divergence(const SpectralShellField& field);   // max |k . coeff|
double max_skew_defect(const SpectralShellField& field);  // max |c + c^T| per mode
bool hermitian_ok(const SpectralShellField& field, double tol = 1e-12);

// Band-limited FFT workspace shared by homogenize; forward projects a real
// grid field onto modes |m| <= M (dealiasing), backward synthesizes.
class FftWorkspace {
public:
    explicit FftWorkspace(const TorusGrid& grid);
    ~FftWorkspace();
    FftWorkspace(const FftWorkspace&) = delete;
    FftWorkspace& operator=(const FftWorkspace&) = delete;

    // Scatter shell coefficients (optionally multiplied by i*k_axis, axis>=0)
    // into the mode buffer; accumulate=false clears first.
    void load_shell(const SpectralShellField& field, int comp, int deriv_axis = -1,
                    bool accumulate = false);
    void clear();
    double backward(double* out);         // buffer -> real grid; returns max |imag|
    void forward(const double* in);       // real grid -> buffer (normalized)
    // Dense band spectrum access after forward(); modes |m| <= M.
    cplx band_coeff(const std::array<int, 3>& m) const;
    void set_band_coeff(const std::array<int, 3>& m, cplx v);
    void apply_derivative(int axis);      // multiply band by i k_axis
    const TorusGrid& grid() const { return grid_; }

private:
    TorusGrid grid_;
    std::size_t npt_ = 0;
    void* plan_fwd_ = nullptr;
    void* plan_bwd_ = nullptr;
    cplx* buf_ = nullptr;
    std::size_t wrap(const std::array<int, 3>& m) const;
};

}  // namespace curlflow
