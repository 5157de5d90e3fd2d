#include "curlflow/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace curlflow {

double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean: empty input");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

double excess_kurtosis(std::span<const double> xs) {
    if (xs.size() < 4) return 0.0;
    const double m = mean(xs);
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = x - m;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= static_cast<double>(xs.size());
    m4 /= static_cast<double>(xs.size());
    if (m2 <= 0.0) return 0.0;
    return m4 / (m2 * m2) - 3.0;
}

double t_quantile_975(std::size_t dof) {
    // Table for small dof; 1.96 asymptote beyond.
    static const double table[] = {
        0,      12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262,
        2.228,  2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093,
        2.086,  2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045,
        2.042};
    if (dof == 0) return 12.706;
    if (dof <= 30) return table[dof];
    if (dof <= 40) return 2.021;
    if (dof <= 60) return 2.000;
    if (dof <= 120) return 1.980;
    return 1.96;
}

MomentEstimate mean_ci(std::span<const double> xs) {
    MomentEstimate est;
    est.value = mean(xs);
    est.n_samples = xs.size();
    if (xs.size() > 1) {
        est.ci_half_width =
            1.96 * std::sqrt(variance(xs) / static_cast<double>(xs.size()));
    }
    return est;
}

MomentEstimate batch_means_ci(std::span<const double> xs, std::size_t batches) {
    if (batches < 16) throw std::invalid_argument("batch_means_ci: need >= 16 batches");
    if (xs.size() < batches)
        throw std::invalid_argument("batch_means_ci: too few samples for batch count");

    const std::size_t per = xs.size() / batches;
    std::vector<double> bm(batches, 0.0);
    for (std::size_t b = 0; b < batches; ++b) {
        double s = 0.0;
        for (std::size_t i = b * per; i < (b + 1) * per; ++i) s += xs[i];
        bm[b] = s / static_cast<double>(per);
    }

    MomentEstimate est;
    est.batch_means = true;
    est.n_samples = xs.size();
    est.value = mean(bm);
    const double tq = t_quantile_975(batches - 1);
    est.ci_half_width = tq * std::sqrt(variance(bm) / static_cast<double>(batches));

    if (excess_kurtosis(xs) > 100.0) {
        est.heavy_tail_flag = true;
        bool positive = std::all_of(xs.begin(), xs.end(), [](double x) { return x > 0.0; });
        if (positive) {
            // Log-domain batch means; map the spread back around the estimate.
            std::vector<double> lbm(batches, 0.0);
            for (std::size_t b = 0; b < batches; ++b) {
                double s = 0.0;
                for (std::size_t i = b * per; i < (b + 1) * per; ++i) s += std::log(xs[i]);
                lbm[b] = s / static_cast<double>(per);
            }
            const double lw = tq * std::sqrt(variance(lbm) / static_cast<double>(batches));
            const double widened = est.value * (std::exp(lw) - 1.0);
            est.ci_half_width = std::max(est.ci_half_width, widened);
        }
    }
    return est;
}

SlopeFit slope_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("slope_fit: size mismatch");
    if (x.size() < 4) throw std::invalid_argument("slope_fit: need >= 4 points");
    const auto n = static_cast<double>(x.size());
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) throw std::invalid_argument("slope_fit: degenerate abscissae");

    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += r * r;
    }
    fit.slope_stderr = std::sqrt(ss_res / ((n - 2.0) * sxx));
    return fit;
}

}  // namespace curlflow
