#pragma once

// Geometric Brownian motion dF = F dB on SL(n), F_0 = id (Ito = Stratonovich
// for this driver since E dB^2 = 0).  Exponential Euler keeps det F = 1
// exactly; Lyapunov exponents come from QR re-orthonormalization of a
// propagated frame.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "curlflow/sl_basis.hpp"
#include "curlflow/stats.hpp"

namespace curlflow {

enum class FlowScheme { Exp, EulerRenorm };

struct FlowState {
    Eigen::MatrixXd F;
    double tau = 0.0;
};

// One step of the flow; dB.dtau is the integrator step.
FlowState step(const FlowState& state, const SlIncrement& dB,
               FlowScheme scheme = FlowScheme::Exp);

// Matrix exponential of a trace-free matrix (closed form for n = 2,
// scaling-and-squaring otherwise).
Eigen::MatrixXd expm_tracefree(const Eigen::MatrixXd& A);

struct FlowOptions {
    int n = 2;
    double tau_end = 1.0;
    double dtau = 0.005;
    std::size_t n_paths = 10000;
    FlowScheme scheme = FlowScheme::Exp;
    uint64_t seed = 1;
    uint64_t stream_salt = 0;      // distinguishes independent ensembles
    int threads = 0;               // 0 = hardware
    std::vector<double> snapshot_taus;  // defaults to {tau_end}
    std::size_t store_path_count = 0;   // paths keeping full snapshot matrices
};

struct FlowPath {
    std::vector<double> taus;
    std::vector<Eigen::MatrixXd> F;  // F_{0,tau} at each snapshot
};

struct FlowSnapshot {
    double tau = 0.0;
    Eigen::MatrixXd mean_F;        // martingale check target: id
    Eigen::MatrixXd mean_FFstar;   // target e^tau id
    std::vector<double> fro2;      // |F|^2 per path (ensemble samples)
};

struct FlowEnsemble {
    FlowOptions opts;
    std::vector<FlowSnapshot> snapshots;
    std::vector<FlowPath> stored_paths;
    double max_det_drift = 0.0;  // max |det F - 1| observed at snapshots
};

FlowEnsemble simulate_ensemble(const FlowOptions& opts);

// F_{tau*,tau} reconstructed along a stored path as F_{tau*}^{-1} F_tau;
// identity for tau <= tau*.  Snapshot times must contain tau* and tau.
Eigen::MatrixXd two_parameter_increment(const FlowPath& path, double tau_star, double tau);

// E |F_tau|^{2p} with CI, and its ratio to e^{p(p+1)tau/2}.  p in {1,2,3}.
struct FrobeniusMoment {
    MomentEstimate estimate;
    double ratio_to_growth = 0.0;
    bool heavy_tail_warning = false;  // relative CI > 20%
};
FrobeniusMoment frobenius_moment(const FlowEnsemble& ens, int p, double tau);

struct LyapunovResult {
    std::vector<double> exponents;  // sorted descending
    std::vector<double> ci;         // 95% half widths (across repeats)
    double sum = 0.0;
};

LyapunovResult lyapunov_spectrum(int n, double tau_end, double dtau, int reorth_every,
                                 uint64_t seed, std::size_t n_repeats = 8, int threads = 0,
                                 double burn_in = 5.0);

}  // namespace curlflow
