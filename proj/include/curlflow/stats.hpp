#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace curlflow {

struct MomentEstimate {
    double value = 0.0;
    double ci_half_width = 0.0;  // 95% half width
    std::size_t n_samples = 0;
    bool batch_means = false;
    bool heavy_tail_flag = false;

    double lower() const { return value - ci_half_width; }
    double upper() const { return value + ci_half_width; }
    bool covers(double x) const { return lower() <= x && x <= upper(); }
};

double mean(std::span<const double> xs);
double variance(std::span<const double> xs);          // unbiased
double excess_kurtosis(std::span<const double> xs);

// Plain-mean estimate with 1.96*stderr interval.
MomentEstimate mean_ci(std::span<const double> xs);

// Batch-means 95% confidence interval.  Requires xs.size() >= batches >= 16.
// Inputs with sample excess kurtosis > 100 are flagged heavy-tailed and the
// interval is widened using log-domain batching (only defined for positive
// samples; falls back to the plain interval otherwise).
MomentEstimate batch_means_ci(std::span<const double> xs, std::size_t batches = 16);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

// Least-squares affine fit y = intercept + slope*x.  Needs >= 4 points and
// non-degenerate abscissae.
SlopeFit slope_fit(std::span<const double> x, std::span<const double> y);

// Two-sided Student-t 97.5% quantile (95% interval half-width multiplier).
double t_quantile_975(std::size_t dof);

}  // namespace curlflow
