#pragma once

// Monte Carlo of dX = b(X) dt + sqrt(2) dW in a frozen field realization.
// The annealed mean-square displacement averages over both the field draws
// and the thermal noise, and is compared against 2 n lambda(T) T.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "curlflow/rng.hpp"
#include "curlflow/spectral_field.hpp"
#include "curlflow/stats.hpp"

namespace curlflow {

enum class InterpOrder { TrigExact, Bicubic };

// Periodic cubic-convolution interpolant (exact on grid points) over the
// oversampled real grid, with an optional trig-exact path kept for
// validation.
class FieldInterpolant {
public:
    FieldInterpolant(RealField field, InterpOrder order);
    // Keeps the spectral field for trig-exact evaluation.
    FieldInterpolant(const SpectralShellField& spec, InterpOrder order);

    void eval(const double* point, double* out) const;  // out[ncomp]
    int ncomp() const { return field_.ncomp; }
    const TorusGrid& grid() const { return field_.grid; }
    InterpOrder order() const { return order_; }
    double max_abs() const { return max_abs_; }

    // Max abs error of the grid interpolant against the trig-exact sum on
    // random probe points (requires spectral constructor).
    double probe_error(std::size_t n_probes, RngStream& rng) const;
    // RMS(div b)/RMS(|grad b|) by centered finite differences on probes.
    double divergence_probe(std::size_t n_probes, RngStream& rng) const;

private:
    RealField field_;
    InterpOrder order_;
    double max_abs_ = 0.0;
    std::vector<std::array<int, 3>> spec_modes_;
    std::vector<cplx> spec_coeffs_;
    int spec_ncomp_ = 0;
    void eval_trig(const double* point, double* out) const;
    void eval_cubic(const double* point, double* out) const;
};

struct ParticleOptions {
    int n = 2;
    int M = 64;
    double epsilon = 0.5;
    double T = 100.0;
    double dt = 0.0;          // 0 -> auto 0.1/(1+|b|_inf)
    std::size_t n_paths = 64;  // thermal paths per field
    std::size_t n_fields = 16; // quenched field draws (ignored for eps = 0)
    uint64_t seed = 1;
    int threads = 0;
    double L_ir = 0.0;        // IR cutoff; 0 -> sqrt(1+T)
    InterpOrder order = InterpOrder::Bicubic;
};

struct MsdResult {
    double T = 0.0;
    MomentEstimate msd;            // E|X_T|^2 with CI over the double ensemble
    double prediction = 0.0;       // 2 n lambda(T) T
    double ratio = 0.0;            // msd / (2 n T)
    std::vector<double> per_field; // per-field mean |X_T|^2
    Eigen::MatrixXd xxt;           // E X x X (annealed isotropy check)
    double dt_used = 0.0;
    double b_inf = 0.0;
};

MsdResult simulate_msd(const ParticleOptions& opts);

// Same machinery on a caller-provided frozen field (sanity oracles).
MsdResult simulate_msd_frozen(const FieldInterpolant& interp, double T, double dt,
                              std::size_t n_paths, uint64_t seed, int threads = 0,
                              bool average_start_cell = true);

struct MsdRow {
    double T = 0.0, msd = 0.0, ci = 0.0, prediction = 0.0, ratio_to_2nT = 0.0,
           lambda_T = 0.0;
};
std::vector<MsdRow> msd_report(const std::vector<MsdResult>& results, double epsilon, int n);

}  // namespace curlflow
