#pragma once

// The scale discretization L_0 = 1 < ... < L_J and the deterministic
// effective-diffusivity functions shared by every scale-indexed process:
//
//   lambda_tilde(L) = sqrt(1 + eps^2 ln L),   tau = ln lambda_tilde,
//   lambda(s)       = sqrt(1 + (eps^2/2) ln(1 + s)).
//
// tau is the intrinsic clock of all scale SDEs; ladders are immutable after
// construction and safe to share across threads.

#include <cstddef>
#include <string>
#include <vector>

namespace curlflow {

enum class LadderSpacing { UniformInTau, GeometricInL };

struct ScaleLadder {
    double epsilon = 0.0;
    std::vector<double> levels;   // L_j, L_0 = 1
    std::vector<double> lambdas;  // lambda_tilde_j
    std::vector<double> taus;     // tau_j = ln lambda_tilde_j

    std::size_t level_count() const { return levels.size(); }
    std::size_t step_count() const { return levels.size() - 1; }
    double tau_max() const { return taus.back(); }
    double L_max() const { return levels.back(); }

    // Effective diffusivity for the shell (L_j, L_{j+1}]: the value with
    //   eps^2 (ln L_{j+1} - ln L_j) / (2 lambda_eff^2) = tau_{j+1} - tau_j,
    // i.e. the choice for which the shell increment of the corrector driver
    // carries quadratic variation exactly n*(tau_{j+1}-tau_j) in the
    // continuum.  Falls back to the midpoint value when the tau increment
    // degenerates (eps -> 0).
    double lambda_effective(std::size_t j) const;
};

double lambda_tilde(double epsilon, double L);
double lambda_of_time(double s, double epsilon);  // lambda(s), s >= 0
double tau_of_scale(double epsilon, double L);    // ln lambda_tilde(L)
double scale_of_tau(double epsilon, double tau);  // inverse of the above

ScaleLadder make_ladder(double epsilon, double L_max, std::size_t J,
                        LadderSpacing spacing = LadderSpacing::UniformInTau);

// Second-order (midpoint) integration of d(lambda) = eps^2 dlnL/(2 lambda)
// from lambda=1; consistency check against the closed form.
double integrate_lambda_ode(double epsilon, double L_max, std::size_t step_count);

// Tolerance-envelope integrals along the curve lambda_tilde(tau) = e^tau,
// L(tau) = exp((e^{2 tau}-1)/eps^2):
//   i1 = e^{p tau*} int_0^{tau*} L^2(tau) e^{-p tau} dtau
//   i2 = int_{tau*}^inf lambda_tilde^2 L^{-p} dtau
//   i3 = int_{tau*}^inf lambda_tilde^{-p} dtau
// The *_scaled values divide out the envelope units and stay finite where the
// raw values overflow (L(tau*) exceeds double range already at moderate
// tau*/eps):
//   i1_scaled = i1 / (L*/lambda*)^2,  i2_scaled = i2 * L*^p,
//   i3_scaled = i3 * lambda*^p.
struct EnvelopeIntegrals {
    double i1 = 0.0, i2 = 0.0, i3 = 0.0;
    double i1_scaled = 0.0, i2_scaled = 0.0, i3_scaled = 0.0;
};
EnvelopeIntegrals envelope_integrals(double epsilon, double tau_star, double p);

}  // namespace curlflow
