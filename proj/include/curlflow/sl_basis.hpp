#pragma once

// The unique (in law) Brownian motion B on sl(n): independent symmetric and
// skew parts with O(n)-invariant covariance, normalized so that
// E B_tau^2 = 0 and E B_tau B_tau^* = tau id.  Increments are sampled as
//   sqrt(dtau) * ( sigma_sym  * sum_a g_a E_a(sym0)
//                + sigma_skew * sum_b h_b E_b(skew) )
// over a Frobenius-orthonormal basis with i.i.d. standard normal
// coefficients.

#include <Eigen/Dense>
#include <vector>

#include "curlflow/rng.hpp"
#include "curlflow/stats.hpp"

namespace curlflow {

struct SlBasis {
    int n = 0;
    std::vector<Eigen::MatrixXd> sym0_basis;  // n(n+1)/2 - 1 elements
    std::vector<Eigen::MatrixXd> skew_basis;  // n(n-1)/2 elements
    double sigma_sym = 0.0;                   // sigma_sym^2  = n/((n-1)(n+2))
    double sigma_skew = 0.0;                  // sigma_skew^2 = 1/(n-1)
};

// Builds the basis and verifies the amplitudes against the basis-square-sum
// identities E X_sym^2 = -E X_skew^2 = id/2; aborts on mismatch > 1e-10.
SlBasis make_basis(int n);

struct SlIncrement {
    Eigen::MatrixXd matrix;
    double dtau = 0.0;
};

SlIncrement sample_increment(const SlBasis& basis, double dtau, RngStream& rng);

// In-place variant for hot loops; `out` must be n x n.
void sample_increment_into(const SlBasis& basis, double dtau, RngStream& rng,
                           Eigen::Ref<Eigen::MatrixXd> out);

// n = 2 closed form: E (G.B_tau)^2 = tau ((tr G)^2 - 4 det G)/4 for
// symmetric G, where G.B is the entrywise contraction sum_ij G_ij B_ij.
double symmetric_form_value(const Eigen::Matrix2d& G, double tau);

struct CovarianceReport {
    int n = 0;
    double tau = 0.0;
    std::size_t n_samples = 0;
    Eigen::MatrixXd ebb;        // E B B   (target 0)
    Eigen::MatrixXd ebbt;       // E B B^* (target tau id)
    double ebb_max_err = 0.0;   // max |E BB| entry, in units of tau
    double ebbt_max_err = 0.0;  // max |E BB^* - tau id| entry, in units of tau
    double ci = 0.0;            // common 95% CI half width per entry (units of tau)
    bool flagged = false;       // any entry off by more than 4 sigma
};

CovarianceReport covariance_report(const SlBasis& basis, double tau,
                                   std::size_t n_samples, RngStream& rng);

}  // namespace curlflow
