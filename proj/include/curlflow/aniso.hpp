#pragma once

// Sphere-integral vector field
//   f(a) = (n/(n-1)) * avg over S^{n-1} of (k.ak)^{-1} (id - k* x k*)
// (normalized sphere measure, so f(id) = id), and the dissipative flow
// d(a)/dtau = f(a) - a with global attractor id.  Linearization at identity:
//   Df(I) adot = 2/((n-1)(n+2)) adot - (n+1)/((n-1)(n+2)) (tr adot) id.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace curlflow {

struct SphereQuadrature {
    int n = 2;
    std::vector<Eigen::VectorXd> nodes;  // unit vectors
    std::vector<double> weights;         // sum to 1
    // max |sum w k x k - id/n| entry; the identity fixing c(n) = n/(n-1)
    double second_moment_defect() const;
};

// n = 2: uniform angular grid (spectrally accurate).
// n = 3: Gauss-Legendre x uniform product rule, exact through the given
//        algebraic order (default 17).
// n >= 4: symmetrized random nodes; `order` controls the node count and a
//        stochastic tolerance applies.
SphereQuadrature make_quadrature(int n, int order = 17, uint64_t seed = 12345);

Eigen::MatrixXd f_of_a(const Eigen::MatrixXd& a, const SphereQuadrature& quad);

// Analytic linearization and a finite-difference probe.
Eigen::MatrixXd df_identity(const Eigen::MatrixXd& adot, int n);
Eigen::MatrixXd df_identity_fd(const Eigen::MatrixXd& adot, const SphereQuadrature& quad,
                               double h = 1e-4);

struct FlowTrajectory {
    std::vector<double> taus;
    std::vector<Eigen::MatrixXd> a;
    std::vector<double> dist_to_id;   // Frobenius
    std::vector<double> eigen_ratio;  // mu_max / mu_min
};

// RK4 on d(a)/dtau = f(a) - a with symmetry re-projection; halves the step
// on SPD loss, aborting after 8 halvings.
FlowTrajectory flow_integrate(const Eigen::MatrixXd& a0, double dtau, double tau_end,
                              const SphereQuadrature& quad);

// f(a') - f(a) must be positive definite when a' <= a, a' != a.
struct MonotonicityReport {
    bool all_positive = true;
    double min_eigenvalue = 0.0;
};
MonotonicityReport monotonicity_check(
    const std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>& pairs_a_aprime,
    const SphereQuadrature& quad);

// n = 2 closed form for diagonal input diag(mu, 1):
//   f = diag(2/(1+sqrt(mu)), 2/(sqrt(mu)(1+sqrt(mu)))).
Eigen::Matrix2d f_diag_closed_form_n2(double mu);

}  // namespace curlflow
