#include "curlflow/scale_ladder.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace curlflow {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// Adaptive Simpson with absolute tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double whole, double tol,
                        int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    if (!(b > a)) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace

double lambda_tilde(double epsilon, double L) {
    return std::sqrt(1.0 + epsilon * epsilon * std::log(L));
}

double lambda_of_time(double s, double epsilon) {
    require(std::isfinite(s) && s >= 0.0, "lambda_of_time: s must be >= 0");
    return std::sqrt(1.0 + 0.5 * epsilon * epsilon * std::log1p(s));
}

double tau_of_scale(double epsilon, double L) { return std::log(lambda_tilde(epsilon, L)); }

double scale_of_tau(double epsilon, double tau) {
    const double lam2 = std::exp(2.0 * tau);
    return std::exp((lam2 - 1.0) / (epsilon * epsilon));
}

double ScaleLadder::lambda_effective(std::size_t j) const {
    const double dlnL = std::log(levels[j + 1]) - std::log(levels[j]);
    const double dtau = taus[j + 1] - taus[j];
    if (dtau <= 0.0 || dlnL <= 0.0) return 0.5 * (lambdas[j] + lambdas[j + 1]);
    return std::sqrt(epsilon * epsilon * dlnL / (2.0 * dtau));
}

ScaleLadder make_ladder(double epsilon, double L_max, std::size_t J, LadderSpacing spacing) {
    require(std::isfinite(epsilon) && epsilon > 0.0 && epsilon <= 1.0,
            "make_ladder: epsilon must be in (0,1]");
    require(std::isfinite(L_max) && L_max >= 1.0, "make_ladder: L_max must be >= 1");
    require(J >= 1, "make_ladder: J must be >= 1");

    ScaleLadder lad;
    lad.epsilon = epsilon;
    lad.levels.resize(J + 1);
    lad.lambdas.resize(J + 1);
    lad.taus.resize(J + 1);

    const double tau_J = tau_of_scale(epsilon, L_max);
    const double lnL_J = std::log(L_max);
    for (std::size_t j = 0; j <= J; ++j) {
        const double t = static_cast<double>(j) / static_cast<double>(J);
        double L;
        if (spacing == LadderSpacing::UniformInTau) {
            L = scale_of_tau(epsilon, t * tau_J);
        } else {
            L = std::exp(t * lnL_J);
        }
        lad.levels[j] = L;
        lad.lambdas[j] = lambda_tilde(epsilon, L);
        lad.taus[j] = std::log(lad.lambdas[j]);
    }
    // Pin the endpoints exactly.
    lad.levels.front() = 1.0;
    lad.lambdas.front() = 1.0;
    lad.taus.front() = 0.0;
    lad.levels.back() = L_max;
    lad.lambdas.back() = lambda_tilde(epsilon, L_max);
    lad.taus.back() = tau_J;

    for (std::size_t j = 0; j + 1 <= J; ++j)
        require(lad.levels[j + 1] >= lad.levels[j], "make_ladder: levels not ordered");
    if (L_max > 1.0)
        for (std::size_t j = 0; j + 1 <= J; ++j)
            require(lad.taus[j + 1] > lad.taus[j], "make_ladder: taus not increasing");
    return lad;
}

double integrate_lambda_ode(double epsilon, double L_max, std::size_t step_count) {
    require(std::isfinite(epsilon) && epsilon >= 0.0 && epsilon <= 1.0,
            "integrate_lambda_ode: epsilon must be in [0,1]");
    require(std::isfinite(L_max) && L_max >= 1.0, "integrate_lambda_ode: L_max must be >= 1");
    require(step_count >= 1, "integrate_lambda_ode: step_count must be >= 1");

    // Midpoint rule on d(lambda)/dlnL = eps^2/(2 lambda).
    const double h = std::log(L_max) / static_cast<double>(step_count);
    const double e2 = epsilon * epsilon;
    double lam = 1.0;
    for (std::size_t i = 0; i < step_count; ++i) {
        const double k1 = 0.5 * e2 / lam;
        const double lam_mid = lam + 0.5 * h * k1;
        lam += h * 0.5 * e2 / lam_mid;
    }
    return lam;
}

EnvelopeIntegrals envelope_integrals(double epsilon, double tau_star, double p) {
    require(std::isfinite(epsilon) && epsilon > 0.0 && epsilon <= 1.0,
            "envelope_integrals: epsilon must be in (0,1]");
    require(std::isfinite(tau_star) && tau_star >= 0.0,
            "envelope_integrals: tau_star must be >= 0");
    require(std::isfinite(p) && p > 0.0, "envelope_integrals: p must be > 0");

    const double e2 = epsilon * epsilon;
    const double Ustar = std::exp(2.0 * tau_star);     // lambda*^2
    const double lnLstar = (Ustar - 1.0) / e2;

    EnvelopeIntegrals out;

    // i3: integrand e^{-p tau} on [tau*, inf); integrate the shifted O(1)
    // integrand for relative accuracy and rescale.
    {
        out.i3_scaled = integrate([p](double u) { return std::exp(-p * u); }, 0.0,
                                  45.0 / p, 1e-13);
        out.i3 = out.i3_scaled * std::exp(-p * tau_star);
    }

    // i2 scaled by L*^p: substitute u = lambda^2; du = 2 u dtau gives
    // (1/2) int_{U*}^inf e^{-p(u-U*)/eps^2} du.
    {
        const double span = 45.0 * e2 / p;
        out.i2_scaled = 0.5 * integrate([p, e2](double v) { return std::exp(-p * v / e2); },
                                        0.0, span, 1e-14);
        const double ln_i2 = std::log(out.i2_scaled) - p * lnLstar;
        out.i2 = std::exp(ln_i2);  // underflows to 0 for large tau*; by design
    }

    // i1 scaled by (L*/lambda*)^2: in the variable v = 2(U* - u)/eps^2,
    //   i1_scaled = lambda*^2 (eps^2/4) int_0^{Vmax} (U*/u)^{p/2} e^{-v} / u dv,
    // u = U* - eps^2 v / 2.  The integrand is an e^{-v} boundary layer.
    if (tau_star > 0.0) {
        const double Vmax = 2.0 * (Ustar - 1.0) / e2;
        const double cut = std::min(Vmax, p * tau_star + 46.0);
        auto f = [Ustar, e2, p](double v) {
            const double u = Ustar - 0.5 * e2 * v;
            return std::pow(Ustar / u, 0.5 * p) * std::exp(-v) / u;
        };
        out.i1_scaled = Ustar * 0.25 * e2 * integrate(f, 0.0, cut, 1e-14);
        const double ln_i1 = std::log(out.i1_scaled) + 2.0 * lnLstar - 2.0 * tau_star;
        out.i1 = ln_i1 > 700.0 ? std::numeric_limits<double>::infinity() : std::exp(ln_i1);
    }

    return out;
}

}  // namespace curlflow
