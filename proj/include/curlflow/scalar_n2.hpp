#pragma once

// n = 2 scalar reductions of the SL(2) flow: the Bessel-type process
// R = |F|^2/2 with dR = R dtau + sqrt(R^2-1) dw, the top singular value
// S = exp(arccosh R), and the comparison geometric Brownian motion
// Q = exp(tau/2 + w).  Coupled triples share one Brownian path and satisfy
// 2R >= S >= Q pathwise.

#include <cstdint>
#include <vector>

#include "curlflow/rng.hpp"
#include "curlflow/sl_flow.hpp"
#include "curlflow/stats.hpp"

namespace curlflow {

enum class ScalarKind { R, S, Q };

struct ScalarPath {
    ScalarKind kind = ScalarKind::R;
    std::vector<double> taus;
    std::vector<double> values;
    uint64_t seed = 0;
    uint64_t stream = 0;
    std::size_t floor_activations = 0;  // R/S boundary-guard hits
    std::size_t steps = 0;
};

// Euler-Maruyama on dR = R dtau + sqrt(max(R^2-1,0)) dw from R_0 = 1 with a
// post-step floor at 1.
ScalarPath simulate_r(double tau_end, double dtau, uint64_t seed, uint64_t stream);

// R = |F|^2 / 2 per stored snapshot of an n = 2 flow ensemble.
std::vector<std::vector<double>> r_from_flow(const FlowEnsemble& ens);

ScalarPath s_from_r(const ScalarPath& r);
double s_of_r(double r);  // exp(arccosh r), r >= 1

// Direct simulation of the top singular value: Euler-Maruyama on
// d ln S = (S^2+1)/(2(S^2-1)) dtau + dw with floor S >= 1 + dtau.
ScalarPath simulate_s(double tau_end, double dtau, uint64_t seed, uint64_t stream);

// Exact sampler Q = exp(tau/2 + w_tau) on the given grid (no discretization
// error in law).
ScalarPath simulate_q(const std::vector<double>& tau_grid, uint64_t seed, uint64_t stream);

struct CoupledTriple {
    ScalarPath r, s, q;  // driven by one Brownian path
};
CoupledTriple simulate_coupled_triple(double tau_end, double dtau, uint64_t seed,
                                      uint64_t stream);

// Ensemble-level summaries -------------------------------------------------

struct ScalarEnsembleStats {
    std::vector<double> taus;
    std::vector<std::vector<double>> samples;  // [tau][path]
    std::size_t floor_activations = 0;
    std::size_t total_steps = 0;
};

// Samples of R at the requested taus over an Euler-Maruyama ensemble.
ScalarEnsembleStats r_ensemble(const std::vector<double>& taus, double dtau,
                               std::size_t n_paths, uint64_t seed, int threads = 0);
ScalarEnsembleStats s_ensemble(const std::vector<double>& taus, double dtau,
                               std::size_t n_paths, uint64_t seed, int threads = 0);
ScalarEnsembleStats q_ensemble(const std::vector<double>& taus, std::size_t n_paths,
                               uint64_t seed, int threads = 0);

struct CoupledStats {
    std::size_t n_triples = 0;
    std::size_t violations = 0;  // grid points violating 2R >= S >= Q
    ScalarEnsembleStats r, s, q;
};
CoupledStats coupled_ensemble(const std::vector<double>& taus, double dtau,
                              std::size_t n_triples, uint64_t seed, int threads = 0);

// ratio = E[Z I(Z >= c (EZ)^exponent)] / E[Z], with CI.
MomentEstimate tail_mass_ratio(std::span<const double> z, double c,
                               double exponent = 1.5);

}  // namespace curlflow
