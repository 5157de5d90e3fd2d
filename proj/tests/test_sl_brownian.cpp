#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "curlflow/sl_basis.hpp"

using namespace curlflow;

// Oracle: the basis-square sums.  For the orthonormal basis used here,
//   sum over sym0 of E_a^2  = (n-1)(n+2)/(2n) id,
//   sum over skew of E_b^2  = -(n-1)/2 id,
// so the 1/2-id normalizations force sigma_sym^2 = n/((n-1)(n+2)) and
// sigma_skew^2 = 1/(n-1).
static void check_amplitudes(int n) {
    const SlBasis b = make_basis(n);
    Eigen::MatrixXd ssym = Eigen::MatrixXd::Zero(n, n);
    for (const auto& m : b.sym0_basis) ssym += m * m;
    Eigen::MatrixXd sskew = Eigen::MatrixXd::Zero(n, n);
    for (const auto& m : b.skew_basis) sskew += m * m;
    const double solved_sym = 0.5 / ssym(0, 0);
    const double solved_skew = -0.5 / sskew(0, 0);
    CHECK(b.sigma_sym * b.sigma_sym == doctest::Approx(solved_sym).epsilon(1e-12));
    CHECK(b.sigma_skew * b.sigma_skew == doctest::Approx(solved_skew).epsilon(1e-12));
}

TEST_CASE("amplitudes from the basis-square oracle") {
    check_amplitudes(2);
    check_amplitudes(3);
    check_amplitudes(5);
    const SlBasis b2 = make_basis(2);
    CHECK(b2.sigma_sym * b2.sigma_sym == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(b2.sigma_skew * b2.sigma_skew == doctest::Approx(1.0).epsilon(1e-12));
    const SlBasis b3 = make_basis(3);
    CHECK(b3.sigma_sym * b3.sigma_sym == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(b3.sigma_skew * b3.sigma_skew == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(b3.sym0_basis.size() == 5);
    CHECK(b3.skew_basis.size() == 3);
}

TEST_CASE("increments are trace-free and scale with dtau") {
    const SlBasis b = make_basis(3);
    RngStream rng(11, 0);
    for (int k = 0; k < 100; ++k) {
        const SlIncrement inc = sample_increment(b, 0.37, rng);
        CHECK(std::abs(inc.matrix.trace()) < 1e-12 * (1.0 + inc.matrix.norm()));
    }
    CHECK_THROWS_AS(sample_increment(b, 0.0, rng), std::invalid_argument);
}

TEST_CASE("Monte Carlo law: E BB* = tau id, E BB = 0") {
    for (int n : {2, 3}) {
        const SlBasis b = make_basis(n);
        RngStream rng(2024, static_cast<uint64_t>(n));
        const double tau = 1.0;
        const CovarianceReport rep = covariance_report(b, tau, 100000, rng);
        CHECK(rep.ebbt_max_err < 0.02);
        CHECK(rep.ebb_max_err < 0.02);
        CHECK(!rep.flagged);
    }
}

TEST_CASE("degenerate time gives exactly zero moments") {
    const SlBasis b = make_basis(3);
    RngStream rng(5, 5);
    const CovarianceReport rep = covariance_report(b, 0.0, 1000, rng);
    CHECK(rep.ebb.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rep.ebbt.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conjugation invariance under fixed rotations") {
    const SlBasis b = make_basis(2);
    const double tau = 1.0;
    const std::size_t N = 100000;
    // Eight rotations/reflections of the square.
    std::vector<Eigen::Matrix2d> os;
    for (int k = 0; k < 4; ++k) {
        const double th = k * M_PI / 2.0;
        Eigen::Matrix2d r;
        r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
        os.push_back(r);
        Eigen::Matrix2d f;
        f << 1, 0, 0, -1;
        os.push_back(r * f);
    }
    for (const auto& O : os) {
        RngStream rng(31, 7);  // same stream: same increments, conjugated
        Eigen::Matrix2d ebbt = Eigen::Matrix2d::Zero();
        Eigen::MatrixXd m(2, 2);
        for (std::size_t s = 0; s < N; ++s) {
            sample_increment_into(b, tau, rng, m);
            const Eigen::Matrix2d c = O * m * O.inverse();
            ebbt += c * c.transpose();
        }
        ebbt /= static_cast<double>(N);
        CHECK((ebbt - tau * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 0.02);
    }
}

// n = 2 closed form E (G.B_tau)^2 = tau((tr G)^2 - 4 det G)/4.
TEST_CASE("symmetric-form values and Monte Carlo check") {
    Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
    CHECK(symmetric_form_value(id, 3.7) == doctest::Approx(0.0));
    Eigen::Matrix2d g1;
    g1 << 1, 0, 0, -1;
    CHECK(symmetric_form_value(g1, 1.0) == doctest::Approx(1.0));
    Eigen::Matrix2d g2;
    g2 << 1, 0, 0, 0;
    CHECK(symmetric_form_value(g2, 2.0) == doctest::Approx(0.5));
    Eigen::Matrix2d bad;
    bad << 0, 1, 0, 0;
    CHECK_THROWS_AS(symmetric_form_value(bad, 1.0), std::invalid_argument);

    const SlBasis b = make_basis(2);
    for (const auto& [G, tau] : {std::pair<Eigen::Matrix2d, double>{g1, 1.0},
                                 std::pair<Eigen::Matrix2d, double>{g2, 2.0}}) {
        RngStream rng(99, 3);
        const std::size_t N = 100000;
        double acc = 0.0;
        Eigen::MatrixXd m(2, 2);
        for (std::size_t s = 0; s < N; ++s) {
            sample_increment_into(b, tau, rng, m);
            const double gb = (G.array() * m.array()).sum();
            acc += gb * gb;
        }
        acc /= static_cast<double>(N);
        const double target = symmetric_form_value(G, tau);
        CHECK(std::abs(acc - target) < 0.03 * (1.0 + target));
    }
}

// Cross-block independence: symmetric and skew contractions decorrelate.
TEST_CASE("sym/skew cross covariance vanishes") {
    const SlBasis b = make_basis(2);
    Eigen::Matrix2d gsym;
    gsym << 1, 0, 0, -1;
    Eigen::Matrix2d gskew;
    gskew << 0, 1, -1, 0;
    RngStream rng(123, 4);
    const std::size_t N = 100000;
    double acc = 0.0;
    Eigen::MatrixXd m(2, 2);
    for (std::size_t s = 0; s < N; ++s) {
        sample_increment_into(b, 1.0, rng, m);
        acc += (gsym.array() * m.array()).sum() * (gskew.array() * m.array()).sum();
    }
    acc /= static_cast<double>(N);
    CHECK(std::abs(acc) < 4.0 * 2.0 / std::sqrt(static_cast<double>(N)));
}

// Additivity in law: increment over t1+t2 vs sum of independent increments,
// matched on 2nd and 4th moments of entries.
TEST_CASE("additivity of increments") {
    const SlBasis b = make_basis(2);
    const double t1 = 0.3, t2 = 0.7;
    const std::size_t N = 200000;
    RngStream r1(7, 1), r2(7, 2);
    double m2a = 0, m4a = 0, m2b = 0, m4b = 0;
    Eigen::MatrixXd x(2, 2), y(2, 2);
    for (std::size_t s = 0; s < N; ++s) {
        sample_increment_into(b, t1 + t2, r1, x);
        const double xa = x(0, 1);
        m2a += xa * xa;
        m4a += xa * xa * xa * xa;
        sample_increment_into(b, t1, r2, x);
        sample_increment_into(b, t2, r2, y);
        const double xb = x(0, 1) + y(0, 1);
        m2b += xb * xb;
        m4b += xb * xb * xb * xb;
    }
    m2a /= N;
    m4a /= N;
    m2b /= N;
    m4b /= N;
    CHECK(std::abs(m2a - m2b) < 0.03 * m2a);
    CHECK(std::abs(m4a - m4b) < 0.1 * m4a);
}
