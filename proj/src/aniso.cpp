#include "curlflow/aniso.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "curlflow/rng.hpp"

namespace curlflow {

double SphereQuadrature::second_moment_defect() const {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t q = 0; q < nodes.size(); ++q)
        s += weights[q] * nodes[q] * nodes[q].transpose();
    s -= Eigen::MatrixXd::Identity(n, n) / n;
    return s.cwiseAbs().maxCoeff();
}

SphereQuadrature make_quadrature(int n, int order, uint64_t seed) {
    if (n < 2) throw std::invalid_argument("make_quadrature: n must be >= 2");
    SphereQuadrature quad;
    quad.n = n;
    if (n == 2) {
        const int m = std::max(8 * order, 64);
        quad.nodes.reserve(static_cast<std::size_t>(m));
        quad.weights.assign(static_cast<std::size_t>(m), 1.0 / m);
        for (int i = 0; i < m; ++i) {
            const double th = (i + 0.5) * 2.0 * M_PI / m;
            Eigen::VectorXd k(2);
            k << std::cos(th), std::sin(th);
            quad.nodes.push_back(k);
        }
    } else if (n == 3) {
        // Gauss-Legendre in cos(theta) x uniform in phi; exact for spherical
        // polynomials of degree <= 2m-1.
        const int m = (order + 2) / 2 + 1;
        // Newton iteration for Legendre nodes.
        std::vector<double> x(static_cast<std::size_t>(m)), w(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) {
            double t = std::cos(M_PI * (i + 0.75) / (m + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = t;
                for (int k = 2; k <= m; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                const double dp = m * (t * p1 - p0) / (t * t - 1.0);
                const double dt = p1 / dp;
                t -= dt;
                if (std::abs(dt) < 1e-15) break;
            }
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= m; ++k) {
                const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double dp = m * (t * p1 - p0) / (t * t - 1.0);
            x[static_cast<std::size_t>(i)] = t;
            w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - t * t) * dp * dp);
        }
        const int mphi = 2 * m;
        for (int i = 0; i < m; ++i) {
            const double ct = x[static_cast<std::size_t>(i)];
            const double st = std::sqrt(std::max(1.0 - ct * ct, 0.0));
            for (int j = 0; j < mphi; ++j) {
                const double ph = (j + 0.5) * 2.0 * M_PI / mphi;
                Eigen::VectorXd k(3);
                k << st * std::cos(ph), st * std::sin(ph), ct;
                quad.nodes.push_back(k);
                quad.weights.push_back(w[static_cast<std::size_t>(i)] / (2.0 * mphi));
            }
        }
    } else {
        // Symmetrized random nodes (antipodal pairs integrate odd terms
        // exactly); stochastic tolerance ~ 1/sqrt(count).
        const int count = 2048 * std::max(order / 8, 1);
        RngStream rng(seed, 0x5fe2e);
        for (int i = 0; i < count; ++i) {
            Eigen::VectorXd k(n);
            double norm = 0.0;
            do {
                for (int a = 0; a < n; ++a) k(a) = rng.normal();
                norm = k.norm();
            } while (norm < 1e-12);
            k /= norm;
            quad.nodes.push_back(k);
            quad.nodes.push_back(-k);
        }
        quad.weights.assign(quad.nodes.size(), 1.0 / static_cast<double>(quad.nodes.size()));
    }
    return quad;
}

Eigen::MatrixXd f_of_a(const Eigen::MatrixXd& a, const SphereQuadrature& quad) {
    const int n = quad.n;
    if (a.rows() != n || a.cols() != n) throw std::invalid_argument("f_of_a: size mismatch");
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + a.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("f_of_a: a must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    const double mu_min = es.eigenvalues().minCoeff();
    const double mu_max = es.eigenvalues().maxCoeff();
    if (!(mu_min > 0.0) || mu_max / mu_min > 1e12)
        throw std::invalid_argument("f_of_a: a must be SPD with condition <= 1e12");

    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t q = 0; q < quad.nodes.size(); ++q) {
        const Eigen::VectorXd& k = quad.nodes[q];
        const double kak = k.dot(a * k);
        out += (quad.weights[q] / kak) *
               (Eigen::MatrixXd::Identity(n, n) - k * k.transpose());
    }
    out *= static_cast<double>(n) / (n - 1.0);
    return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd df_identity(const Eigen::MatrixXd& adot, int n) {
    if ((adot - adot.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * (1.0 + adot.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("df_identity: adot must be symmetric");
    const double den = (n - 1.0) * (n + 2.0);
    return (2.0 / den) * adot -
           ((n + 1.0) / den) * adot.trace() * Eigen::MatrixXd::Identity(n, n);
}

Eigen::MatrixXd df_identity_fd(const Eigen::MatrixXd& adot, const SphereQuadrature& quad,
                               double h) {
    const int n = quad.n;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    return (f_of_a(I + h * adot, quad) - f_of_a(I - h * adot, quad)) / (2.0 * h);
}

FlowTrajectory flow_integrate(const Eigen::MatrixXd& a0, double dtau, double tau_end,
                              const SphereQuadrature& quad) {
    if (dtau <= 0.0 || dtau > 0.05)
        throw std::invalid_argument("flow_integrate: need 0 < dtau <= 0.05");
    const int n = quad.n;
    auto rhs = [&](const Eigen::MatrixXd& a) { return (f_of_a(a, quad) - a).eval(); };
    auto spd_ok = [&](const Eigen::MatrixXd& a) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
        return es.eigenvalues().minCoeff() > 0.0;
    };

    FlowTrajectory traj;
    Eigen::MatrixXd a = 0.5 * (a0 + a0.transpose());
    double tau = 0.0;
    auto record = [&] {
        traj.taus.push_back(tau);
        traj.a.push_back(a);
        traj.dist_to_id.push_back((a - Eigen::MatrixXd::Identity(n, n)).norm());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
        traj.eigen_ratio.push_back(es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff());
    };
    record();
    while (tau < tau_end - 1e-12) {
        double h = std::min(dtau, tau_end - tau);
        Eigen::MatrixXd next;
        int halvings = 0;
        for (;;) {
            const Eigen::MatrixXd k1 = rhs(a);
            const Eigen::MatrixXd k2 = rhs(a + 0.5 * h * k1);
            const Eigen::MatrixXd k3 = rhs(a + 0.5 * h * k2);
            const Eigen::MatrixXd k4 = rhs(a + h * k3);
            next = a + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            next = 0.5 * (next + next.transpose());
            if (spd_ok(next)) break;
            h *= 0.5;
            if (++halvings > 8)
                throw std::runtime_error("flow_integrate: SPD lost after 8 halvings");
        }
        a = next;
        tau += h;
        record();
    }
    return traj;
}

MonotonicityReport monotonicity_check(
    const std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>& pairs_a_aprime,
    const SphereQuadrature& quad) {
    MonotonicityReport rep;
    rep.min_eigenvalue = std::numeric_limits<double>::infinity();
    for (const auto& [a, ap] : pairs_a_aprime) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> order(a - ap);
        if (order.eigenvalues().minCoeff() < -1e-12 ||
            (a - ap).cwiseAbs().maxCoeff() < 1e-14)
            throw std::invalid_argument("monotonicity_check: need a' <= a, a' != a");
        const Eigen::MatrixXd diff = f_of_a(ap, quad) - f_of_a(a, quad);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff);
        const double mn = es.eigenvalues().minCoeff();
        rep.min_eigenvalue = std::min(rep.min_eigenvalue, mn);
        if (mn <= 0.0) rep.all_positive = false;
    }
    return rep;
}

Eigen::Matrix2d f_diag_closed_form_n2(double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("f_diag_closed_form_n2: mu must be > 0");
    const double s = std::sqrt(mu);
    Eigen::Matrix2d f = Eigen::Matrix2d::Zero();
    f(0, 0) = 2.0 / (1.0 + s);
    f(1, 1) = 2.0 / (s * (1.0 + s));
    return f;
}

}  // namespace curlflow
