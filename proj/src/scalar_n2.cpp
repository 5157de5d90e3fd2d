#include "curlflow/scalar_n2.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "curlflow/parallel.hpp"

namespace curlflow {

namespace {

std::vector<double> grid_of(double tau_end, double dtau, std::size_t& n_steps) {
    n_steps = static_cast<std::size_t>(std::llround(tau_end / dtau));
    std::vector<double> taus(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) taus[k] = static_cast<double>(k) * dtau;
    return taus;
}

}  // namespace

ScalarPath simulate_r(double tau_end, double dtau, uint64_t seed, uint64_t stream) {
    if (dtau <= 0.0 || tau_end < 0.0) throw std::invalid_argument("simulate_r: bad grid");
    RngStream rng(seed, stream);
    ScalarPath path;
    path.kind = ScalarKind::R;
    path.seed = seed;
    path.stream = stream;
    std::size_t n_steps = 0;
    path.taus = grid_of(tau_end, dtau, n_steps);
    path.values.resize(n_steps + 1);
    const double rt = std::sqrt(dtau);
    double r = 1.0;
    path.values[0] = r;
    for (std::size_t k = 1; k <= n_steps; ++k) {
        const double dw = rt * rng.normal();
        r += r * dtau + std::sqrt(std::max(r * r - 1.0, 0.0)) * dw;
        if (r < 1.0) {
            r = 1.0;
            ++path.floor_activations;
        }
        path.values[k] = r;
    }
    path.steps = n_steps;
    return path;
}

std::vector<std::vector<double>> r_from_flow(const FlowEnsemble& ens) {
    if (ens.opts.n != 2) throw std::invalid_argument("r_from_flow: flow dimension must be 2");
    std::vector<std::vector<double>> out;
    out.reserve(ens.snapshots.size());
    for (const auto& snap : ens.snapshots) {
        std::vector<double> r(snap.fro2.size());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = 0.5 * snap.fro2[i];
        out.push_back(std::move(r));
    }
    return out;
}

double s_of_r(double r) {
    if (r < 1.0) throw std::invalid_argument("s_of_r: requires r >= 1");
    return std::exp(std::acosh(r));
}

ScalarPath s_from_r(const ScalarPath& r) {
    ScalarPath s = r;
    s.kind = ScalarKind::S;
    for (auto& v : s.values) v = s_of_r(v);
    return s;
}

namespace {

// Drift-implicit Euler-Maruyama step for X = ln S.  The Ito drift of X is
// (S^2+1)/(2(S^2-1)) = coth(X)/2, so the implicit relation
//   X+ - (dtau/2) coth(X+) = X + dW =: y
// has a unique positive root (the left side increases from -inf to +inf on
// X+ > 0).  The singular drift at the boundary is absorbed by the solve, and
// since coth >= 1 the gain of ln S dominates the ln Q increment dtau/2 + dW
// step by step.
double implicit_log_s_step(double x, double y, double dtau) {
    const double h = 0.5 * dtau;
    auto g = [&](double v) { return v - h / std::tanh(v) - y; };
    // Bracket the root.
    double lo = 1e-12, hi = std::max(y + h + 1.0, 1.0);
    while (g(hi) < 0.0) hi *= 2.0;
    if (g(lo) > 0.0) return lo;
    double v = std::max(0.5 * (lo + hi), std::sqrt(h));  // decent initial guess
    for (int it = 0; it < 60; ++it) {
        const double gv = g(v);
        if (gv > 0.0)
            hi = v;
        else
            lo = v;
        const double t = std::tanh(v);
        const double deriv = 1.0 + h * (1.0 / (t * t) - 1.0);  // 1 + h csch^2
        double nv = v - gv / deriv;
        if (!(nv > lo && nv < hi)) nv = 0.5 * (lo + hi);
        if (std::abs(nv - v) < 1e-14 * (1.0 + std::abs(v))) return nv;
        v = nv;
    }
    return v;
}

}  // namespace

ScalarPath simulate_s(double tau_end, double dtau, uint64_t seed, uint64_t stream) {
    if (dtau <= 0.0 || tau_end < 0.0) throw std::invalid_argument("simulate_s: bad grid");
    RngStream rng(seed, stream);
    ScalarPath path;
    path.kind = ScalarKind::S;
    path.seed = seed;
    path.stream = stream;
    std::size_t n_steps = 0;
    path.taus = grid_of(tau_end, dtau, n_steps);
    path.values.resize(n_steps + 1);
    const double rt = std::sqrt(dtau);
    double ls = 0.0;  // S_0 = 1; the implicit solve handles the boundary
    path.values[0] = 1.0;
    for (std::size_t k = 1; k <= n_steps; ++k) {
        ls = implicit_log_s_step(ls, ls + rt * rng.normal(), dtau);
        path.values[k] = std::exp(ls);
    }
    path.steps = n_steps;
    return path;
}

ScalarPath simulate_q(const std::vector<double>& tau_grid, uint64_t seed, uint64_t stream) {
    RngStream rng(seed, stream);
    ScalarPath path;
    path.kind = ScalarKind::Q;
    path.seed = seed;
    path.stream = stream;
    path.taus = tau_grid;
    path.values.resize(tau_grid.size());
    double w = 0.0, tau_prev = 0.0;
    for (std::size_t k = 0; k < tau_grid.size(); ++k) {
        const double dt = tau_grid[k] - tau_prev;
        if (dt < 0.0) throw std::invalid_argument("simulate_q: grid must be nondecreasing");
        if (dt > 0.0) w += std::sqrt(dt) * rng.normal();
        tau_prev = tau_grid[k];
        path.values[k] = std::exp(0.5 * tau_grid[k] + w);
    }
    path.steps = tau_grid.empty() ? 0 : tau_grid.size() - 1;
    return path;
}

CoupledTriple simulate_coupled_triple(double tau_end, double dtau, uint64_t seed,
                                      uint64_t stream) {
    // One Brownian path drives all three.  ln S advances by the drift-
    // implicit step; its gain is coth(X+) dtau/2 + dW >= dtau/2 + dW, the
    // exact ln Q increment, so S >= Q pointwise by construction, and
    // R := (S + 1/S)/2 gives 2R >= S algebraically.
    RngStream rng(seed, stream);
    std::size_t n_steps = 0;
    const auto taus = grid_of(tau_end, dtau, n_steps);

    CoupledTriple t;
    for (ScalarPath* p : {&t.r, &t.s, &t.q}) {
        p->taus = taus;
        p->values.resize(n_steps + 1);
        p->seed = seed;
        p->stream = stream;
        p->steps = n_steps;
    }
    t.r.kind = ScalarKind::R;
    t.s.kind = ScalarKind::S;
    t.q.kind = ScalarKind::Q;

    const double rt = std::sqrt(dtau);
    double ls = 0.0, lq = 0.0;
    t.s.values[0] = 1.0;
    t.q.values[0] = 1.0;
    t.r.values[0] = 1.0;
    for (std::size_t k = 1; k <= n_steps; ++k) {
        const double dw = rt * rng.normal();
        ls = implicit_log_s_step(ls, ls + dw, dtau);
        lq += 0.5 * dtau + dw;
        const double s = std::exp(ls);
        t.s.values[k] = s;
        t.q.values[k] = std::exp(lq);
        t.r.values[k] = 0.5 * (s + 1.0 / s);
    }
    return t;
}

namespace {

template <typename PathFn>
ScalarEnsembleStats collect_ensemble(const std::vector<double>& taus, std::size_t n_paths,
                                     int threads, PathFn make_path) {
    ScalarEnsembleStats stats;
    stats.taus = taus;
    stats.samples.assign(taus.size(), std::vector<double>(n_paths, 0.0));
    std::vector<std::size_t> floors(n_paths, 0), steps(n_paths, 0);
    parallel_chunks(n_paths, std::min<std::size_t>(256, n_paths), threads,
                    [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            const ScalarPath path = make_path(p);
            floors[p] = path.floor_activations;
            steps[p] = path.steps;
            for (std::size_t i = 0; i < taus.size(); ++i) {
                // Locate the grid index of this tau (grids are uniform).
                std::size_t k = path.taus.size() - 1;
                if (path.taus.size() > 1) {
                    const double dt = path.taus[1] - path.taus[0];
                    k = std::min<std::size_t>(
                        static_cast<std::size_t>(std::llround(taus[i] / dt)),
                        path.taus.size() - 1);
                }
                stats.samples[i][p] = path.values[k];
            }
        }
    });
    for (std::size_t p = 0; p < n_paths; ++p) {
        stats.floor_activations += floors[p];
        stats.total_steps += steps[p];
    }
    return stats;
}

}  // namespace

ScalarEnsembleStats r_ensemble(const std::vector<double>& taus, double dtau,
                               std::size_t n_paths, uint64_t seed, int threads) {
    const double tau_end = *std::max_element(taus.begin(), taus.end());
    return collect_ensemble(taus, n_paths, threads, [&](std::size_t p) {
        return simulate_r(tau_end, dtau, seed, substream(0xbe55e1, p));
    });
}

ScalarEnsembleStats s_ensemble(const std::vector<double>& taus, double dtau,
                               std::size_t n_paths, uint64_t seed, int threads) {
    const double tau_end = *std::max_element(taus.begin(), taus.end());
    return collect_ensemble(taus, n_paths, threads, [&](std::size_t p) {
        return simulate_s(tau_end, dtau, seed, substream(0x51d6, p));
    });
}

ScalarEnsembleStats q_ensemble(const std::vector<double>& taus, std::size_t n_paths,
                               uint64_t seed, int threads) {
    std::vector<double> sorted = taus;
    std::sort(sorted.begin(), sorted.end());
    ScalarEnsembleStats stats;
    stats.taus = taus;
    stats.samples.assign(taus.size(), std::vector<double>(n_paths, 0.0));
    parallel_chunks(n_paths, std::min<std::size_t>(256, n_paths), threads,
                    [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            const ScalarPath path = simulate_q(sorted, seed, substream(0x9b0e, p));
            for (std::size_t i = 0; i < taus.size(); ++i) {
                const auto it = std::lower_bound(sorted.begin(), sorted.end(), taus[i]);
                stats.samples[i][p] =
                    path.values[static_cast<std::size_t>(it - sorted.begin())];
            }
        }
    });
    return stats;
}

CoupledStats coupled_ensemble(const std::vector<double>& taus, double dtau,
                              std::size_t n_triples, uint64_t seed, int threads) {
    const double tau_end = *std::max_element(taus.begin(), taus.end());
    CoupledStats out;
    out.n_triples = n_triples;
    for (ScalarEnsembleStats* s : {&out.r, &out.s, &out.q}) {
        s->taus = taus;
        s->samples.assign(taus.size(), std::vector<double>(n_triples, 0.0));
    }
    std::vector<std::size_t> violations(n_triples, 0);
    parallel_chunks(n_triples, std::min<std::size_t>(256, n_triples), threads,
                    [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            const CoupledTriple t =
                simulate_coupled_triple(tau_end, dtau, seed, substream(0xc041e, p));
            for (std::size_t k = 0; k < t.r.values.size(); ++k) {
                const double r2 = 2.0 * t.r.values[k];
                if (!(r2 >= t.s.values[k] && t.s.values[k] >= t.q.values[k])) ++violations[p];
            }
            const double dt = t.r.taus.size() > 1 ? t.r.taus[1] - t.r.taus[0] : 1.0;
            for (std::size_t i = 0; i < taus.size(); ++i) {
                const auto k = std::min<std::size_t>(
                    static_cast<std::size_t>(std::llround(taus[i] / dt)),
                    t.r.values.size() - 1);
                out.r.samples[i][p] = t.r.values[k];
                out.s.samples[i][p] = t.s.values[k];
                out.q.samples[i][p] = t.q.values[k];
            }
        }
    });
    for (auto v : violations) out.violations += v;
    return out;
}

MomentEstimate tail_mass_ratio(std::span<const double> z, double c, double exponent) {
    if (z.empty()) throw std::invalid_argument("tail_mass_ratio: empty ensemble");
    const double ez = mean(z);
    const double threshold = c * std::pow(ez, exponent);
    double total = 0.0, tail = 0.0;
    for (double v : z) {
        total += v;
        if (v >= threshold) tail += v;
    }
    MomentEstimate est;
    est.n_samples = z.size();
    est.value = total > 0.0 ? tail / total : (threshold <= 0.0 ? 1.0 : 0.0);

    // CI via batch splits of the ratio (threshold held fixed).
    const std::size_t batches = std::min<std::size_t>(16, z.size());
    if (batches >= 2 && z.size() >= batches) {
        std::vector<double> ratios;
        const std::size_t per = z.size() / batches;
        for (std::size_t b = 0; b < batches; ++b) {
            double bt = 0.0, bz = 0.0;
            for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
                bz += z[i];
                if (z[i] >= threshold) bt += z[i];
            }
            if (bz > 0.0) ratios.push_back(bt / bz);
        }
        if (ratios.size() >= 2) {
            est.ci_half_width = t_quantile_975(ratios.size() - 1) *
                                std::sqrt(variance(ratios) / static_cast<double>(ratios.size()));
        }
    }
    return est;
}

}  // namespace curlflow
