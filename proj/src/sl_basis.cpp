#include "curlflow/sl_basis.hpp"

#include <cmath>
#include <stdexcept>

namespace curlflow {

namespace {
constexpr double kSqrt1_2 = 0.70710678118654752440;
}

SlBasis make_basis(int n) {
    if (n < 2) throw std::invalid_argument("make_basis: n must be >= 2");

    SlBasis b;
    b.n = n;

    // Symmetrized elementary matrices (E_ij + E_ji)/sqrt(2), i < j.
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
            m(i, j) = m(j, i) = kSqrt1_2;
            b.sym0_basis.push_back(m);
        }
    }
    // Diagonal trace-free combinations diag(1,..,1,-k,0,..)/sqrt(k(k+1)).
    for (int k = 1; k < n; ++k) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        const double norm = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
        for (int i = 0; i < k; ++i) m(i, i) = norm;
        m(k, k) = -static_cast<double>(k) * norm;
        b.sym0_basis.push_back(m);
    }
    // Skew matrices (E_ij - E_ji)/sqrt(2), i < j.
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
            m(i, j) = kSqrt1_2;
            m(j, i) = -kSqrt1_2;
            b.skew_basis.push_back(m);
        }
    }

    const double nn = n;
    b.sigma_sym = std::sqrt(nn / ((nn - 1.0) * (nn + 2.0)));
    b.sigma_skew = std::sqrt(1.0 / (nn - 1.0));

    // Re-derive the amplitudes from the basis-square sums and cross-check:
    // sum_a E_a^2 = c * id on each block, and sigma^2 * c must equal +-1/2.
    Eigen::MatrixXd ssym = Eigen::MatrixXd::Zero(n, n);
    for (const auto& m : b.sym0_basis) ssym += m * m;
    Eigen::MatrixXd sskew = Eigen::MatrixXd::Zero(n, n);
    for (const auto& m : b.skew_basis) sskew += m * m;

    const double csym = ssym(0, 0);
    const double cskew = -sskew(0, 0);
    if ((ssym - csym * Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-12 ||
        (sskew + cskew * Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-12)
        throw std::logic_error("make_basis: basis square sums not isotropic");
    if (std::abs(b.sigma_sym * b.sigma_sym * csym - 0.5) > 1e-10 ||
        std::abs(b.sigma_skew * b.sigma_skew * cskew - 0.5) > 1e-10)
        throw std::logic_error("make_basis: amplitude normalization mismatch");

    // Frobenius orthonormality.
    std::vector<const Eigen::MatrixXd*> all;
    for (const auto& m : b.sym0_basis) all.push_back(&m);
    for (const auto& m : b.skew_basis) all.push_back(&m);
    for (std::size_t a = 0; a < all.size(); ++a) {
        for (std::size_t c = a; c < all.size(); ++c) {
            const double ip = (all[a]->transpose() * (*all[c])).trace();
            const double want = (a == c) ? 1.0 : 0.0;
            if (std::abs(ip - want) > 1e-12)
                throw std::logic_error("make_basis: basis not orthonormal");
        }
    }
    return b;
}

void sample_increment_into(const SlBasis& basis, double dtau, RngStream& rng,
                           Eigen::Ref<Eigen::MatrixXd> out) {
    if (!(dtau > 0.0)) throw std::invalid_argument("sample_increment: dtau must be > 0");
    const double rt = std::sqrt(dtau);
    out.setZero();
    for (const auto& m : basis.sym0_basis) out += (rt * basis.sigma_sym * rng.normal()) * m;
    for (const auto& m : basis.skew_basis) out += (rt * basis.sigma_skew * rng.normal()) * m;
}

SlIncrement sample_increment(const SlBasis& basis, double dtau, RngStream& rng) {
    SlIncrement inc;
    inc.dtau = dtau;
    inc.matrix.resize(basis.n, basis.n);
    sample_increment_into(basis, dtau, rng, inc.matrix);
    return inc;
}

double symmetric_form_value(const Eigen::Matrix2d& G, double tau) {
    if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + G.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("symmetric_form_value: G must be symmetric");
    const double tr = G.trace();
    return 0.25 * tau * (tr * tr - 4.0 * G.determinant());
}

CovarianceReport covariance_report(const SlBasis& basis, double tau,
                                   std::size_t n_samples, RngStream& rng) {
    if (n_samples < 1000)
        throw std::invalid_argument("covariance_report: need n_samples >= 1000");
    const int n = basis.n;

    CovarianceReport rep;
    rep.n = n;
    rep.tau = tau;
    rep.n_samples = n_samples;
    rep.ebb = Eigen::MatrixXd::Zero(n, n);
    rep.ebbt = Eigen::MatrixXd::Zero(n, n);
    if (tau == 0.0) return rep;  // degenerate time: all moments identically 0

    Eigen::MatrixXd bmat(n, n), sq(n, n), sqt(n, n);
    Eigen::MatrixXd var_acc = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t s = 0; s < n_samples; ++s) {
        sample_increment_into(basis, tau, rng, bmat);
        sq.noalias() = bmat * bmat;
        sqt.noalias() = bmat * bmat.transpose();
        rep.ebb += sq;
        rep.ebbt += sqt;
        var_acc += sqt.cwiseProduct(sqt);
    }
    const double inv = 1.0 / static_cast<double>(n_samples);
    rep.ebb *= inv;
    rep.ebbt *= inv;
    var_acc *= inv;

    rep.ebb_max_err = rep.ebb.cwiseAbs().maxCoeff() / tau;
    rep.ebbt_max_err =
        (rep.ebbt - tau * Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() / tau;
    // Conservative shared CI from the largest per-entry variance of BB^*.
    const double max_var = (var_acc - rep.ebbt.cwiseProduct(rep.ebbt)).maxCoeff();
    rep.ci = 1.96 * std::sqrt(std::max(max_var, 0.0) * inv) / tau;
    const double four_sigma = rep.ci * 4.0 / 1.96;
    rep.flagged = rep.ebb_max_err > four_sigma || rep.ebbt_max_err > four_sigma;
    return rep;
}

}  // namespace curlflow
