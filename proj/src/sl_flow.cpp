#include "curlflow/sl_flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "curlflow/parallel.hpp"

namespace curlflow {

namespace {

// exp(A) for trace-free 2x2: A^2 = -det(A) id, so the series collapses to
// c0 id + c1 A with c0/c1 hyperbolic or trigonometric in sqrt(|det A|).
inline void expm2_tracefree(const Eigen::Ref<const Eigen::MatrixXd>& A,
                            Eigen::Ref<Eigen::MatrixXd> out) {
    const double th2 = -(A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0));
    double c0, c1;
    if (std::abs(th2) < 1e-12) {
        c0 = 1.0 + 0.5 * th2;
        c1 = 1.0 + th2 / 6.0;
    } else if (th2 > 0.0) {
        const double th = std::sqrt(th2);
        c0 = std::cosh(th);
        c1 = std::sinh(th) / th;
    } else {
        const double om = std::sqrt(-th2);
        c0 = std::cos(om);
        c1 = std::sin(om) / om;
    }
    out(0, 0) = c0 + c1 * A(0, 0);
    out(0, 1) = c1 * A(0, 1);
    out(1, 0) = c1 * A(1, 0);
    out(1, 1) = c0 + c1 * A(1, 1);
}

// Scaling-and-squaring with a truncated Taylor series; adequate for the
// small trace-free increments this module produces.
Eigen::MatrixXd expm_general(const Eigen::MatrixXd& A) {
    const double nrm = A.cwiseAbs().rowwise().sum().maxCoeff();
    int s = 0;
    double scale = 1.0;
    while (nrm * scale > 0.25) {
        scale *= 0.5;
        ++s;
    }
    const Eigen::MatrixXd B = A * scale;
    const int n = static_cast<int>(A.rows());
    Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
    for (int k = 1; k <= 13; ++k) {
        term = (term * B) / static_cast<double>(k);
        result += term;
        if (term.cwiseAbs().maxCoeff() < 1e-18) break;
    }
    for (int k = 0; k < s; ++k) result = result * result;
    return result;
}

inline void expm_into(const Eigen::Ref<const Eigen::MatrixXd>& A,
                      Eigen::Ref<Eigen::MatrixXd> out) {
    if (A.rows() == 2) {
        expm2_tracefree(A, out);
    } else {
        out = expm_general(A);
    }
}

void apply_step(Eigen::MatrixXd& F, const Eigen::Ref<const Eigen::MatrixXd>& dB,
                FlowScheme scheme, Eigen::MatrixXd& scratch, Eigen::MatrixXd& scratch2) {
    const int n = static_cast<int>(F.rows());
    if (scheme == FlowScheme::Exp) {
        expm_into(dB, scratch);
        scratch2.noalias() = F * scratch;
        F.swap(scratch2);
    } else {
        scratch = Eigen::MatrixXd::Identity(n, n) + dB;
        scratch2.noalias() = F * scratch;
        const double det = scratch2.determinant();
        if (!(det > 0.0)) throw std::runtime_error("flow step: determinant lost positivity");
        F = scratch2 * std::pow(det, -1.0 / static_cast<double>(n));
    }
    if (!F.allFinite()) throw std::runtime_error("flow step: non-finite state");
}

}  // namespace

Eigen::MatrixXd expm_tracefree(const Eigen::MatrixXd& A) {
    Eigen::MatrixXd out(A.rows(), A.cols());
    expm_into(A, out);
    return out;
}

FlowState step(const FlowState& state, const SlIncrement& dB, FlowScheme scheme) {
    FlowState next;
    next.F = state.F;
    next.tau = state.tau + dB.dtau;
    Eigen::MatrixXd s1(state.F.rows(), state.F.cols()), s2 = s1;
    apply_step(next.F, dB.matrix, scheme, s1, s2);
    return next;
}

FlowEnsemble simulate_ensemble(const FlowOptions& opts_in) {
    FlowOptions opts = opts_in;
    if (opts.tau_end <= 0.0) throw std::invalid_argument("simulate_ensemble: tau_end must be > 0");
    if (opts.dtau <= 0.0) throw std::invalid_argument("simulate_ensemble: dtau must be > 0");
    if (opts.snapshot_taus.empty()) opts.snapshot_taus = {opts.tau_end};
    std::sort(opts.snapshot_taus.begin(), opts.snapshot_taus.end());

    const auto n_steps = static_cast<std::size_t>(std::llround(opts.tau_end / opts.dtau));
    if (n_steps < 1) throw std::invalid_argument("simulate_ensemble: no steps");
    if (opts.n_paths * n_steps > (std::size_t{1} << 36))
        throw std::runtime_error("simulate_ensemble: resource guard tripped (paths*steps)");

    const int n = opts.n;
    const SlBasis basis = make_basis(n);

    // Snapshot step indices (snap at the nearest completed step).
    std::vector<std::size_t> snap_steps;
    for (double t : opts.snapshot_taus) {
        auto k = static_cast<std::size_t>(std::llround(t / opts.dtau));
        snap_steps.push_back(std::min(k, n_steps));
    }

    FlowEnsemble ens;
    ens.opts = opts;
    ens.snapshots.resize(snap_steps.size());
    for (std::size_t s = 0; s < snap_steps.size(); ++s) {
        ens.snapshots[s].tau = static_cast<double>(snap_steps[s]) * opts.dtau;
        ens.snapshots[s].mean_F = Eigen::MatrixXd::Zero(n, n);
        ens.snapshots[s].mean_FFstar = Eigen::MatrixXd::Zero(n, n);
        ens.snapshots[s].fro2.resize(opts.n_paths);
    }
    ens.stored_paths.resize(std::min(opts.store_path_count, opts.n_paths));

    struct ChunkAcc {
        std::vector<Eigen::MatrixXd> sum_F, sum_FFstar;
        double det_drift = 0.0;
    };
    const std::size_t n_chunks = std::min<std::size_t>(256, opts.n_paths);
    std::vector<ChunkAcc> acc(n_chunks);

    parallel_chunks(opts.n_paths, n_chunks, opts.threads,
                    [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        ChunkAcc& a = acc[chunk];
        a.sum_F.assign(snap_steps.size(), Eigen::MatrixXd::Zero(n, n));
        a.sum_FFstar.assign(snap_steps.size(), Eigen::MatrixXd::Zero(n, n));
        Eigen::MatrixXd F(n, n), dB(n, n), s1(n, n), s2(n, n), ffs(n, n);
        for (std::size_t path = begin; path < end; ++path) {
            RngStream rng(opts.seed, substream(0x51f10e, opts.stream_salt, path));
            F = Eigen::MatrixXd::Identity(n, n);
            const bool store = path < ens.stored_paths.size();
            FlowPath* stored = store ? &ens.stored_paths[path] : nullptr;
            if (store) {
                stored->taus.clear();
                stored->F.clear();
                stored->taus.push_back(0.0);
                stored->F.push_back(F);
            }
            std::size_t next_snap = 0;
            // Snapshot at step 0 if requested.
            while (next_snap < snap_steps.size() && snap_steps[next_snap] == 0) {
                a.sum_F[next_snap] += F;
                a.sum_FFstar[next_snap] += F * F.transpose();
                ens.snapshots[next_snap].fro2[path] = F.squaredNorm();
                ++next_snap;
            }
            for (std::size_t k = 1; k <= n_steps && next_snap < snap_steps.size(); ++k) {
                sample_increment_into(basis, opts.dtau, rng, dB);
                apply_step(F, dB, opts.scheme, s1, s2);
                while (next_snap < snap_steps.size() && snap_steps[next_snap] == k) {
                    a.sum_F[next_snap] += F;
                    ffs.noalias() = F * F.transpose();
                    a.sum_FFstar[next_snap] += ffs;
                    ens.snapshots[next_snap].fro2[path] = ffs.trace();
                    a.det_drift = std::max(a.det_drift, std::abs(F.determinant() - 1.0));
                    if (store) {
                        stored->taus.push_back(static_cast<double>(k) * opts.dtau);
                        stored->F.push_back(F);
                    }
                    ++next_snap;
                }
            }
        }
    });

    const double inv = 1.0 / static_cast<double>(opts.n_paths);
    for (std::size_t c = 0; c < n_chunks; ++c) {
        if (acc[c].sum_F.empty()) continue;
        for (std::size_t s = 0; s < snap_steps.size(); ++s) {
            ens.snapshots[s].mean_F += acc[c].sum_F[s] * inv;
            ens.snapshots[s].mean_FFstar += acc[c].sum_FFstar[s] * inv;
        }
        ens.max_det_drift = std::max(ens.max_det_drift, acc[c].det_drift);
    }
    return ens;
}

Eigen::MatrixXd two_parameter_increment(const FlowPath& path, double tau_star, double tau) {
    const int n = static_cast<int>(path.F.front().rows());
    if (tau <= tau_star) return Eigen::MatrixXd::Identity(n, n);
    auto locate = [&](double t) -> std::size_t {
        for (std::size_t i = 0; i < path.taus.size(); ++i)
            if (std::abs(path.taus[i] - t) < 1e-9) return i;
        throw std::invalid_argument("two_parameter_increment: tau outside stored horizon");
    };
    const std::size_t i0 = locate(tau_star);
    const std::size_t i1 = locate(tau);
    return path.F[i0].inverse() * path.F[i1];
}

FrobeniusMoment frobenius_moment(const FlowEnsemble& ens, int p, double tau) {
    if (p < 1 || p > 3) throw std::invalid_argument("frobenius_moment: p must be in {1,2,3}");
    const FlowSnapshot* snap = nullptr;
    for (const auto& s : ens.snapshots)
        if (std::abs(s.tau - tau) < 1e-9) snap = &s;
    if (!snap) throw std::invalid_argument("frobenius_moment: no snapshot at requested tau");

    std::vector<double> xs(snap->fro2.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        xs[i] = std::pow(snap->fro2[i], static_cast<double>(p));

    FrobeniusMoment out;
    out.estimate = mean_ci(xs);
    out.estimate.n_samples = xs.size();
    const double growth = std::exp(0.5 * p * (p + 1) * snap->tau);
    out.ratio_to_growth = out.estimate.value / growth;
    out.heavy_tail_warning =
        out.estimate.ci_half_width > 0.2 * std::abs(out.estimate.value);
    return out;
}

LyapunovResult lyapunov_spectrum(int n, double tau_end, double dtau, int reorth_every,
                                 uint64_t seed, std::size_t n_repeats, int threads,
                                 double burn_in) {
    if (reorth_every < 1) throw std::invalid_argument("lyapunov_spectrum: reorth_every >= 1");
    const auto n_steps = static_cast<std::size_t>(std::llround(tau_end / dtau));
    const SlBasis basis = make_basis(n);

    std::vector<std::vector<double>> per_repeat(n_repeats);
    parallel_chunks(n_repeats, n_repeats, threads,
                    [&](std::size_t r, std::size_t, std::size_t) {
        RngStream rng(seed, substream(0x17a9, r));
        Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
        Eigen::MatrixXd dB(n, n), E(n, n), Z(n, n);
        std::vector<double> logs(static_cast<std::size_t>(n), 0.0);
        double tau_acc = 0.0;
        bool in_burn = burn_in > 0.0;
        for (std::size_t k = 1; k <= n_steps; ++k) {
            sample_increment_into(basis, dtau, rng, dB);
            // F_{k}^dagger = exp(dB_k)^dagger F_{k-1}^dagger: propagate the
            // frame by the transposed increment on the left.
            expm_into(dB, E);
            Z.noalias() = E.transpose() * Q;
            Q.swap(Z);
            const double tau_k = static_cast<double>(k) * dtau;
            if (k % static_cast<std::size_t>(reorth_every) == 0 || k == n_steps) {
                Eigen::HouseholderQR<Eigen::MatrixXd> qr(Q);
                Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
                Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
                for (int i = 0; i < n; ++i) {
                    const double d = R(i, i);
                    if (std::abs(d) < 1e-300)
                        throw std::runtime_error("lyapunov_spectrum: frame degeneracy");
                    // Keep Q's columns aligned with positive diagonals.
                    if (d < 0.0) Q.col(i) = -Q.col(i);
                    if (!in_burn) logs[static_cast<std::size_t>(i)] += std::log(std::abs(d));
                }
                if (in_burn && tau_k >= burn_in) {
                    in_burn = false;
                    tau_acc = tau_k;  // exponents averaged over (burn_in, tau_end]
                }
            }
        }
        const double span = static_cast<double>(n_steps) * dtau - tau_acc;
        for (auto& v : logs) v /= span;
        per_repeat[r] = logs;
    });

    LyapunovResult res;
    res.exponents.resize(static_cast<std::size_t>(n));
    res.ci.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::vector<double> xs(n_repeats);
        for (std::size_t r = 0; r < n_repeats; ++r) xs[r] = per_repeat[r][static_cast<std::size_t>(i)];
        const auto est = mean_ci(xs);
        res.exponents[static_cast<std::size_t>(i)] = est.value;
        res.ci[static_cast<std::size_t>(i)] =
            t_quantile_975(n_repeats - 1) / 1.96 * est.ci_half_width;
        res.sum += est.value;
    }
    // QR already yields descending order for this flow; sort defensively.
    std::vector<std::size_t> idx(res.exponents.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return res.exponents[a] > res.exponents[b]; });
    LyapunovResult sorted = res;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        sorted.exponents[i] = res.exponents[idx[i]];
        sorted.ci[i] = res.ci[idx[i]];
    }
    return sorted;
}

}  // namespace curlflow
