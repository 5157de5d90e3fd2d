#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "curlflow/homogenize.hpp"
#include "curlflow/rng.hpp"
#include "curlflow/stats.hpp"

using namespace curlflow;

namespace {

ScaleLadder zero_eps_ladder(std::size_t J, double L_max) {
    // Degenerate clock (eps = 0): lambda = 1, tau = 0 at all levels.
    ScaleLadder lad;
    lad.epsilon = 0.0;
    for (std::size_t j = 0; j <= J; ++j) {
        lad.levels.push_back(std::exp(std::log(L_max) * static_cast<double>(j) /
                                      static_cast<double>(J)));
        lad.lambdas.push_back(1.0);
        lad.taus.push_back(0.0);
    }
    return lad;
}

// Two-level sub-ladder (L_lo, L_hi] of the eps-clock, for single-step probes.
ScaleLadder sub_ladder(double eps, double L_lo, double L_hi) {
    ScaleLadder lad;
    lad.epsilon = eps;
    lad.levels = {L_lo, L_hi};
    lad.lambdas = {lambda_tilde(eps, L_lo), lambda_tilde(eps, L_hi)};
    lad.taus = {std::log(lad.lambdas[0]), std::log(lad.lambdas[1])};
    return lad;
}

}  // namespace

TEST_CASE("level-0 state is exactly zero and residuum vanishes") {
    const TorusGrid grid(2, 16);
    LadderState st = make_initial_state(grid);
    FftWorkspace ws(grid);
    const ResiduumStats rs = residuum_from_definition(st, 1.0, ws);
    CHECK(rs.e_f2 == doctest::Approx(0.0));
    CHECK(rs.mean_f.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("zero drift keeps all proxies at zero") {
    const TorusGrid grid(2, 16);
    const ScaleLadder lad = zero_eps_ladder(4, 8.0);
    FftWorkspace ws(grid);
    LadderState st = make_initial_state(grid);
    RngStream rng(1, 1);
    for (std::size_t j = 0; j < lad.step_count(); ++j) {
        const SpectralShellField db =
            sample_shell(grid, 0.0, lad.levels[j], lad.levels[j + 1], rng);
        step_ladder_level(st, lad, j, db, ws);
    }
    double worst = 0.0;
    for (const auto& c : st.phi_r)
        for (double v : c) worst = std::max(worst, std::abs(v));
    CHECK(worst == doctest::Approx(0.0));
    const ResiduumStats rs = residuum_from_definition(st, 1.0, ws);
    CHECK(rs.e_f2 == doctest::Approx(0.0));
}

TEST_CASE("first level: phi~ equals the first increment exactly") {
    const TorusGrid grid(2, 16);
    const ScaleLadder lad = make_ladder(0.3, 4.0, 2);
    FftWorkspace ws(grid);
    LadderState st = make_initial_state(grid);
    RngStream rng(7, 0);
    const SpectralShellField db = sample_shell_increment(grid, lad, 0, rng);
    const double lam = shell_lambda(grid, lad, 0);
    const SpectralShellField dphi = corrector_increment(db, lam);
    const RealField dphi_real = synthesize_realspace(dphi);
    step_ladder_level(st, lad, 0, db, ws);
    const std::size_t npt = dphi_real.points();
    double worst = 0.0;
    for (int i = 0; i < 2; ++i)
        for (std::size_t x = 0; x < npt; ++x)
            worst = std::max(worst, std::abs(st.phi_r[static_cast<std::size_t>(i)][x] -
                                             dphi_real.comp(i)[x]));
    CHECK(worst < 1e-12);
}

TEST_CASE("QV accumulator matches tau id / 0 (small grid)") {
    const TorusGrid grid(2, 48);
    const ScaleLadder lad = make_ladder(0.3, 8.0, 6);
    const QvResult qv = qv_accumulator(grid, lad, 11, 300, 4, 0);
    const double tau = lad.tau_max();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const double target = i == j ? tau : 0.0;
            CHECK(std::abs(qv.sym(i, j) - target) < 0.05 * tau);
            CHECK(std::abs(qv.raw(i, j)) < 0.05 * tau);
        }
    CHECK(std::abs(qv.sym.trace() / 2.0 - tau) < 0.03 * tau);
}

TEST_CASE("coupling bridge: second moments and decorrelation (small grid)") {
    const TorusGrid grid(2, 48);
    const ScaleLadder lad = make_ladder(0.5, 16.0, 10);
    std::vector<std::array<double, 3>> pts{{0.0, 0.0, 0.0},
                                           {1.0, 0.0, 0.0},
                                           {120.0, 0.0, 0.0}};
    const CouplingResult cr = coupled_b_at_points(grid, lad, pts, 13, 400, 0);
    const double tau = lad.tau_max();
    CHECK(std::abs(cr.ebbt.trace() / 2.0 - tau) < 0.05 * tau);
    CHECK(cr.ebb.cwiseAbs().maxCoeff() < 5.0 * cr.ci + 0.05 * tau);
    // x = y: the cross moment is the full covariance.
    CHECK(cr.cross[0] == doctest::Approx(cr.ebbt.trace() / 2.0).epsilon(1e-12));
    // Distant point with ln r > tau: decorrelated.
    CHECK(std::log(lambda_of_time(120.0 * 120.0, 0.5)) > tau);
    CHECK(std::abs(cr.cross[2]) < 4.0 * cr.ci);
    // Moderate separation: strictly between.
    CHECK(cr.cross[1] > 0.0);
    CHECK(cr.cross[1] < tau);
}

TEST_CASE("msd prediction values") {
    CHECK(msd_prediction(0.0, 0.5, 2) == doctest::Approx(0.0));
    const double T = std::exp(8.0) - 1.0;
    CHECK(msd_prediction(T, 0.5, 2) ==
          doctest::Approx(4.0 * std::sqrt(2.0) * T).epsilon(1e-12));
    CHECK(msd_prediction(10.0, 0.0, 2) == doctest::Approx(40.0));
}

TEST_CASE("run_ladder ensemble produces finite decaying residua") {
    HomogenizeOptions ho;
    ho.grid = TorusGrid(2, 32);
    ho.ladder = make_ladder(0.2, 8.0, 8);
    ho.seed = 5;
    ho.n_realizations = 4;
    ho.output_levels = {0, 4, 8};
    const LadderRunResult res = run_ladder(ho);
    CHECK(res.mean.size() == 3);
    CHECK(res.mean[0].e_phi2 == doctest::Approx(0.0));
    CHECK(res.mean[0].e_f2 == doctest::Approx(0.0));
    CHECK(res.mean[1].e_phi2 > 0.0);
    CHECK(std::isfinite(res.mean[2].e_f2));
    // E f~ = 0 within loose Monte Carlo bounds at this tiny ensemble.
    CHECK(res.mean[2].mean_f.cwiseAbs().maxCoeff() <
          5.0 * std::sqrt(res.mean[2].e_f2 / 4.0));
}

// Residuum SDE consistency: on one fixed state, the definitional increment
// of f~ over a single shell matches the SDE form
//   df = f grad(dphi) + (phi~^j a + sigma~^j) grad d_j dphi + phi~ (x) db
// with a mismatch that shrinks as the shell narrows.
TEST_CASE("residuum increment consistency under refinement") {
    const TorusGrid grid(2, 24);
    const double eps = 0.3;
    const int n = 2;

    // Fixed base state: ladder 1 -> 2 in 4 levels.
    const ScaleLadder base = make_ladder(eps, 2.0, 4);
    FftWorkspace ws(grid);
    LadderState st0 = make_initial_state(grid);
    for (std::size_t j = 0; j < base.step_count(); ++j) {
        RngStream rng(23, substream(4, j));
        step_ladder_level(st0, base, j, sample_shell_increment(grid, base, j, rng), ws);
    }
    const double tau2 = tau_of_scale(eps, 2.0);

    auto mismatch = [&](double dtau_probe, uint64_t salt) {
        const double L_hi = scale_of_tau(eps, tau2 + dtau_probe);
        const ScaleLadder probe = sub_ladder(eps, 2.0, L_hi);
        RngStream rng(29, salt);
        const SpectralShellField db = sample_shell_increment(grid, probe, 0, rng);
        const double lam = shell_lambda(grid, probe, 0);
        const SpectralShellField dphi = corrector_increment(db, lam);

        RealField f_before;
        residuum_from_definition(st0, probe.lambdas[0], ws, &f_before);
        LadderState st = st0;
        step_ladder_level(st, probe, 0, db, ws);
        RealField f_after;
        residuum_from_definition(st, probe.lambdas[1], ws, &f_after);

        const std::size_t npt = f_before.points();
        // Synthesize the driver derivatives.
        std::vector<std::vector<double>> g1(4);   // d_j dphi^i at [i*2+j]
        for (int j = 0; j < n; ++j) {
            const RealField g = synthesize_gradient(dphi, j);
            for (int i = 0; i < n; ++i)
                g1[static_cast<std::size_t>(i * n + j)] =
                    std::vector<double>(g.comp(i), g.comp(i) + npt);
        }
        std::vector<std::vector<double>> g2(8);   // d_m d_j dphi^i at [(i*2+j)*2+m]
        for (int j = 0; j < n; ++j) {
            SpectralShellField d1 = dphi;
            for (std::size_t q = 0; q < d1.modes.size(); ++q)
                for (int a = 0; a < n; ++a)
                    d1.at(q)[a] *= cplx(0, 1) * d1.kvec(q, j);
            for (int m = 0; m < n; ++m) {
                const RealField g = synthesize_gradient(d1, m);
                for (int i = 0; i < n; ++i)
                    g2[static_cast<std::size_t>((i * n + j) * n + m)] =
                        std::vector<double>(g.comp(i), g.comp(i) + npt);
            }
        }
        const RealField db_real = synthesize_realspace(db);

        // Compare in the retained band |m| <= M: the state updates are
        // band-projected, so the pointwise products in `pred` must be
        // projected too before the two sides can be compared.
        std::vector<double> got_field(npt), pred_field(npt);
        std::vector<std::array<int, 3>> band = shell_modes(grid, 1.0, 1e18);
        band.push_back({0, 0, 0});
        FftWorkspace wsp(grid);
        double num = 0.0, den = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int l = 0; l < n; ++l) {
                for (std::size_t x = 0; x < npt; ++x) {
                    double pred = 0.0;
                    // f_L grad dphi^i
                    for (int j = 0; j < n; ++j)
                        pred += g1[static_cast<std::size_t>(i * n + j)][x] *
                                f_before.comp(j * n + l)[x];
                    // (phi~^j a + sigma~^j) grad d_j dphi^i, contraction on
                    // the first index of a^{ml} = delta + Psi^{ml}.
                    for (int j = 0; j < n; ++j) {
                        const double phij = st0.phi_r[static_cast<std::size_t>(j)][x];
                        for (int m = 0; m < n; ++m) {
                            double aml = (m == l) ? phij : 0.0;
                            // Psi^{ml} from the single pair (0,1) in n=2.
                            if (m == 0 && l == 1) aml += phij * st0.psi_r[0][x];
                            if (m == 1 && l == 0) aml -= phij * st0.psi_r[0][x];
                            // sigma~^{j,ml}
                            double sig = 0.0;
                            if (m == 0 && l == 1)
                                sig = st0.sigma_r[static_cast<std::size_t>(j)][0][x];
                            if (m == 1 && l == 0)
                                sig = -st0.sigma_r[static_cast<std::size_t>(j)][0][x];
                            pred += (aml + sig) *
                                    g2[static_cast<std::size_t>((i * n + j) * n + m)][x];
                        }
                    }
                    // phi~^i db^l
                    pred += st0.phi_r[static_cast<std::size_t>(i)][x] * db_real.comp(l)[x];
                    pred_field[x] = pred;
                    got_field[x] =
                        f_after.comp(i * n + l)[x] - f_before.comp(i * n + l)[x];
                }
                wsp.forward(got_field.data());
                std::vector<cplx> got_band(band.size());
                for (std::size_t q = 0; q < band.size(); ++q)
                    got_band[q] = wsp.band_coeff(band[q]);
                wsp.forward(pred_field.data());
                for (std::size_t q = 0; q < band.size(); ++q) {
                    const cplx d = got_band[q] - wsp.band_coeff(band[q]);
                    num += std::norm(d);
                    den += std::norm(got_band[q]);
                }
            }
        }
        return std::sqrt(num) / std::sqrt(std::max(den, 1e-300));
    };

    // Average the relative mismatch over a few shells at two resolutions.
    double coarse = 0.0, fine = 0.0;
    for (uint64_t s = 0; s < 3; ++s) {
        coarse += mismatch(0.008, 100 + s) / 3.0;
        fine += mismatch(0.004, 200 + s) / 3.0;
    }
    // The definitional increment contains the SDE terms plus O(dtau) product
    // corrections: the relative mismatch must shrink with the step.
    CHECK(fine < coarse);
    CHECK(coarse < 0.5);  // the SDE form explains the bulk of the increment
    MESSAGE("relative mismatch coarse=", coarse, " fine=", fine,
            " rate=", std::log2(coarse / fine) / std::log2(2.0));
}
