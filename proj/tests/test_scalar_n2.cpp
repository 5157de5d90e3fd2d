#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "curlflow/scalar_n2.hpp"

using namespace curlflow;

TEST_CASE("R starts at one and respects the floor") {
    const ScalarPath p = simulate_r(2.0, 0.005, 1, 0);
    CHECK(p.values.front() == doctest::Approx(1.0));
    for (double v : p.values) CHECK(v >= 1.0);
}

TEST_CASE("E R = e^tau and the p=2 band") {
    const std::vector<double> taus{0.5, 1.0};
    const ScalarEnsembleStats st = r_ensemble(taus, 0.005, 100000, 2);
    for (std::size_t i = 0; i < taus.size(); ++i) {
        const double target = std::exp(taus[i]);
        CHECK(std::abs(mean(st.samples[i]) - target) < 0.02 * target);
        double m2 = 0.0;
        for (double v : st.samples[i]) m2 += v * v;
        m2 /= static_cast<double>(st.samples[i].size());
        CHECK(m2 > 0.25 * std::exp(3.0 * taus[i]));
        CHECK(m2 < std::exp(3.0 * taus[i]));
        // Exact second moment: E R^2 = (2/3) e^{3 tau} + 1/3.
        const double pred = 2.0 / 3.0 * std::exp(3.0 * taus[i]) + 1.0 / 3.0;
        CHECK(std::abs(m2 - pred) < 0.08 * pred);
    }
    // Floor activations are logged and rare; from R_0 = 1 the escape phase
    // keeps the observed rate near 0.6% at this step size.
    const double rate = static_cast<double>(st.floor_activations) /
                        static_cast<double>(st.total_steps);
    CHECK(rate < 0.01);
    MESSAGE("floor activation rate = ", rate);
}

TEST_CASE("r_from_flow matches simulate_r in moments") {
    FlowOptions fo;
    fo.n = 2;
    fo.tau_end = 1.0;
    fo.dtau = 0.005;
    fo.n_paths = 50000;
    fo.seed = 3;
    const FlowEnsemble ens = simulate_ensemble(fo);
    const auto r = r_from_flow(ens);
    const double er = mean(r.back());
    CHECK(std::abs(er - std::exp(1.0)) < 0.03 * std::exp(1.0));
    // tau = 0 snapshot: R = 1 exactly.
    FlowOptions f0 = fo;
    f0.snapshot_taus = {0.0};
    f0.n_paths = 100;
    const auto r0 = r_from_flow(simulate_ensemble(f0));
    for (double v : r0.front()) CHECK(v == doctest::Approx(1.0));
    CHECK_THROWS_AS(r_from_flow(simulate_ensemble([&] {
                        FlowOptions f3 = fo;
                        f3.n = 3;
                        f3.n_paths = 10;
                        return f3;
                    }())),
                    std::invalid_argument);
}

TEST_CASE("Lyapunov growth of R along the flow") {
    FlowOptions fo;
    fo.n = 2;
    fo.tau_end = 100.0;
    fo.dtau = 0.005;
    fo.n_paths = 64;
    fo.seed = 8;
    const FlowEnsemble ens = simulate_ensemble(fo);
    const auto r = r_from_flow(ens);
    double acc = 0.0;
    for (double v : r.back()) acc += std::log(v) / 100.0;
    acc /= static_cast<double>(r.back().size());
    CHECK(std::abs(acc - 0.5) < 0.05);
}

TEST_CASE("s_from_r transform and closed-form round trip") {
    CHECK(s_of_r(1.0) == doctest::Approx(1.0));
    for (double s : {1.5, 3.0, 10.0}) {
        const double r = 0.5 * (s + 1.0 / s);
        CHECK(s_of_r(r) == doctest::Approx(s).epsilon(1e-12));
    }
    CHECK_THROWS_AS(s_of_r(0.99), std::invalid_argument);
}

// Coupled runs: the squared top singular value of F equals S pathwise.
// Oracle: closed-form eigenvalues of the 2x2 SPD matrix F^T F.
TEST_CASE("top singular value of the flow matches the S transform") {
    FlowOptions fo;
    fo.n = 2;
    fo.tau_end = 1.0;
    fo.dtau = 0.005;
    fo.n_paths = 64;
    fo.seed = 13;
    fo.store_path_count = 64;
    fo.snapshot_taus = {0.5, 1.0};
    const FlowEnsemble ens = simulate_ensemble(fo);
    for (const auto& path : ens.stored_paths) {
        for (const auto& F : path.F) {
            const Eigen::Matrix2d G = (F.transpose() * F).topLeftCorner<2, 2>();
            const double tr = G.trace(), det = G.determinant();
            const double smax = 0.5 * (tr + std::sqrt(std::max(tr * tr - 4.0 * det, 0.0)));
            const double r = 0.5 * F.squaredNorm();
            CHECK(std::abs(smax - s_of_r(std::max(r, 1.0))) < 1e-9 * (1.0 + smax));
        }
    }
}

TEST_CASE("direct S simulation agrees with the transform in moments") {
    const std::vector<double> taus{0.5, 1.0};
    const ScalarEnsembleStats via_r = r_ensemble(taus, 0.0025, 100000, 4);
    const ScalarEnsembleStats direct = s_ensemble(taus, 0.0025, 100000, 5);
    for (std::size_t i = 0; i < taus.size(); ++i) {
        std::vector<double> s_transform(via_r.samples[i].size());
        for (std::size_t p = 0; p < s_transform.size(); ++p)
            s_transform[p] = s_of_r(via_r.samples[i][p]);
        const MomentEstimate a = mean_ci(s_transform);
        const MomentEstimate c = mean_ci(direct.samples[i]);
        CHECK(std::abs(a.value - c.value) <
              2.0 * (a.ci_half_width + c.ci_half_width) + 0.02 * a.value);
    }
}

TEST_CASE("exact Q sampler moments") {
    const std::vector<double> taus{1.0};
    const ScalarEnsembleStats qs = q_ensemble(taus, 200000, 6);
    const double e = std::exp(1.0);
    CHECK(std::abs(mean(qs.samples[0]) - e) < 0.02 * e);
    double m2 = 0.0;
    for (double v : qs.samples[0]) m2 += v * v;
    m2 /= static_cast<double>(qs.samples[0].size());
    CHECK(std::abs(m2 - std::exp(3.0)) < 0.04 * std::exp(3.0));
}

TEST_CASE("coupled triples: pathwise domination with zero violations") {
    const std::vector<double> taus{0.5, 1.0};
    const CoupledStats cs = coupled_ensemble(taus, 0.005, 10000, 7);
    CHECK(cs.violations == 0);
    // Marginal sanity of the coupled R: E R = e^tau within 3%.
    for (std::size_t i = 0; i < taus.size(); ++i) {
        const double target = std::exp(taus[i]);
        CHECK(std::abs(mean(cs.r.samples[i]) - target) < 0.03 * target);
    }
}

// E Q I(Q >= (EQ)^{3/2}) = EQ/2 exactly (Gaussian identity).
TEST_CASE("tail mass ratios") {
    const std::vector<double> taus{1.0};
    const ScalarEnsembleStats qs = q_ensemble(taus, 400000, 8);
    const MomentEstimate ratio = tail_mass_ratio(qs.samples[0], 1.0);
    CHECK(std::abs(ratio.value - 0.5) < 0.015);

    // Z = 2R with c = 1/(2 sqrt(2)): ratio >= 1/4 with margin.
    const ScalarEnsembleStats rs = r_ensemble(taus, 0.005, 200000, 9);
    std::vector<double> z(rs.samples[0].size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = 2.0 * rs.samples[0][i];
    const MomentEstimate rr = tail_mass_ratio(z, 1.0 / (2.0 * std::sqrt(2.0)));
    CHECK(rr.value - rr.ci_half_width > 0.25);

    // Degenerate constant ensemble.
    std::vector<double> c(100, 0.5);
    CHECK(tail_mass_ratio(c, 1.0).value == doctest::Approx(1.0));
}
