#include "curlflow/homogenize.hpp"

#include <cmath>
#include <stdexcept>

#include "curlflow/parallel.hpp"
#include "curlflow/rng.hpp"

namespace curlflow {

namespace {

std::vector<std::pair<int, int>> skew_pairs(int n) {
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
    return pairs;
}

}  // namespace

BandIndex::BandIndex(const TorusGrid& grid) : M_(grid.M), n_(grid.n) {
    const int W = 2 * M_ + 1;
    std::size_t span = 1;
    for (int a = 0; a < n_; ++a) span *= static_cast<std::size_t>(W);
    lookup_.assign(span, -1);
    modes.push_back({0, 0, 0});
    auto flat = [&](const std::array<int, 3>& m) {
        std::size_t idx = 0;
        for (int a = 0; a < n_; ++a)
            idx = idx * static_cast<std::size_t>(W) + static_cast<std::size_t>(m[a] + M_);
        return idx;
    };
    lookup_[flat({0, 0, 0})] = 0;
    const int64_t M2 = static_cast<int64_t>(M_) * M_;
    std::array<int, 3> m{0, 0, 0};
    const int zmax = (n_ == 3) ? M_ : 0;
    for (m[0] = -M_; m[0] <= M_; ++m[0])
        for (m[1] = -M_; m[1] <= M_; ++m[1])
            for (m[2] = -zmax; m[2] <= zmax; ++m[2]) {
                const int64_t m2 = static_cast<int64_t>(m[0]) * m[0] +
                                   static_cast<int64_t>(m[1]) * m[1] +
                                   static_cast<int64_t>(m[2]) * m[2];
                if (m2 == 0 || m2 > M2) continue;
                lookup_[flat(m)] = static_cast<int32_t>(modes.size());
                modes.push_back(m);
            }
}

std::size_t BandIndex::at(const std::array<int, 3>& m) const {
    const int W = 2 * M_ + 1;
    std::size_t idx = 0;
    for (int a = 0; a < n_; ++a) {
        if (m[a] < -M_ || m[a] > M_) throw std::out_of_range("BandIndex: mode outside band");
        idx = idx * static_cast<std::size_t>(W) + static_cast<std::size_t>(m[a] + M_);
    }
    const int32_t v = lookup_[idx];
    if (v < 0) throw std::out_of_range("BandIndex: mode outside band");
    return static_cast<std::size_t>(v);
}

namespace {

// Shared per-thread workspace bundling the FFT buffers with the band index.
struct BandOps {
    explicit BandOps(const TorusGrid& grid) : band(grid), ws(grid) {
        npt = 1;
        for (int a = 0; a < grid.n; ++a) npt *= static_cast<std::size_t>(grid.real_points);
    }
    BandIndex band;
    FftWorkspace ws;
    std::size_t npt = 0;

    void to_real(const BandSpectrum& spec, std::vector<double>& out, int deriv_axis = -1) {
        ws.clear();
        const cplx iu(0.0, 1.0);
        const auto& modes = band.modes;
        for (std::size_t q = 0; q < modes.size(); ++q) {
            cplx v = spec[q];
            if (deriv_axis >= 0)
                v *= iu * (static_cast<double>(modes[q][deriv_axis]) / ws.grid().M);
            if (v != cplx(0.0, 0.0)) ws.set_band_coeff(modes[q], v);
        }
        out.resize(npt);
        ws.backward(out.data());
    }

    // Real grid -> band spectrum (projection = dealiasing).
    void to_band(const std::vector<double>& in, BandSpectrum& out) {
        ws.forward(in.data());
        out.resize(band.size());
        for (std::size_t q = 0; q < band.size(); ++q) out[q] = ws.band_coeff(band.modes[q]);
    }

    void add_shell(const SpectralShellField& f, int comp, BandSpectrum& io) {
        for (std::size_t q = 0; q < f.modes.size(); ++q)
            io[band.at(f.modes[q])] += f.at(q)[comp];
    }
};

thread_local std::unique_ptr<BandOps> tl_ops;
BandOps& ops_for(const TorusGrid& grid) {
    if (!tl_ops || tl_ops->ws.grid().M != grid.M || tl_ops->ws.grid().n != grid.n ||
        tl_ops->ws.grid().real_points != grid.real_points)
        tl_ops = std::make_unique<BandOps>(grid);
    return *tl_ops;
}

}  // namespace

LadderState make_initial_state(const TorusGrid& grid) {
    LadderState st;
    st.grid = grid;
    const int n = grid.n;
    const auto pairs = skew_pairs(n);
    BandIndex band(grid);
    std::size_t npt = 1;
    for (int a = 0; a < n; ++a) npt *= static_cast<std::size_t>(grid.real_points);

    st.phi.assign(n, BandSpectrum(band.size(), cplx(0, 0)));
    st.sigma.assign(n, std::vector<BandSpectrum>(pairs.size(),
                                                 BandSpectrum(band.size(), cplx(0, 0))));
    st.psi.assign(pairs.size(), BandSpectrum(band.size(), cplx(0, 0)));
    st.phi_r.assign(n, std::vector<double>(npt, 0.0));
    st.sigma_r.assign(n, std::vector<std::vector<double>>(
                             pairs.size(), std::vector<double>(npt, 0.0)));
    st.psi_r.assign(pairs.size(), std::vector<double>(npt, 0.0));
    return st;
}

double shell_lambda(const TorusGrid& grid, const ScaleLadder& ladder, std::size_t level) {
    const double dtau = ladder.taus[level + 1] - ladder.taus[level];
    if (dtau <= 0.0) return ladder.lambda_effective(level);
    const double T = shell_qv_trace(grid, ladder.epsilon, ladder.levels[level],
                                    ladder.levels[level + 1]);
    if (T <= 0.0) return ladder.lambda_effective(level);
    return std::sqrt(T / (grid.n * dtau));
}

void step_ladder_level(LadderState& state, const ScaleLadder& ladder, std::size_t level,
                       const SpectralShellField& db, FftWorkspace&) {
    const TorusGrid& grid = state.grid;
    const int n = grid.n;
    const auto pairs = skew_pairs(n);
    BandOps& ops = ops_for(grid);
    const std::size_t npt = ops.npt;

    const double lam = shell_lambda(grid, ladder, level);
    const SpectralShellField dphi = corrector_increment(db, lam);
    const SpectralShellField dpsi = stream_increment(db);
    const SpectralShellField dsig = sigma_increment(db, lam);
    const std::vector<double> cov = phi_psi_covariation(grid, ladder.epsilon, lam,
                                                        db.L_lo, db.L_hi);

    // Synthesize the shell increments.
    std::vector<std::vector<double>> dphi_r(n);
    std::vector<std::vector<std::vector<double>>> grad_dphi(n);  // [i][j]
    for (int i = 0; i < n; ++i) {
        grad_dphi[static_cast<std::size_t>(i)].resize(n);
        ops.ws.load_shell(dphi, i);
        dphi_r[static_cast<std::size_t>(i)].resize(npt);
        ops.ws.backward(dphi_r[static_cast<std::size_t>(i)].data());
        for (int j = 0; j < n; ++j) {
            ops.ws.load_shell(dphi, i, j);
            auto& g = grad_dphi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            g.resize(npt);
            ops.ws.backward(g.data());
        }
    }
    std::vector<std::vector<double>> dpsi_r(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        ops.ws.load_shell(dpsi, pairs[p].first * n + pairs[p].second);
        dpsi_r[p].resize(npt);
        ops.ws.backward(dpsi_r[p].data());
    }
    std::vector<std::vector<std::vector<double>>> dsig_r(n);  // [i][p]
    for (int i = 0; i < n; ++i) {
        dsig_r[static_cast<std::size_t>(i)].resize(pairs.size());
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            ops.ws.load_shell(dsig, (i * n + pairs[p].first) * n + pairs[p].second);
            auto& s = dsig_r[static_cast<std::size_t>(i)][p];
            s.resize(npt);
            ops.ws.backward(s.data());
        }
    }

    // Pointwise updates using the pre-step state (Ito evaluation).
    std::vector<double> work(npt);
    std::vector<BandSpectrum> phi_upd(n);
    for (int i = 0; i < n; ++i) {
        for (std::size_t x = 0; x < npt; ++x) {
            double u = dphi_r[static_cast<std::size_t>(i)][x];
            for (int j = 0; j < n; ++j)
                u += state.phi_r[static_cast<std::size_t>(j)][x] *
                     grad_dphi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][x];
            work[x] = u;
        }
        ops.to_band(work, phi_upd[static_cast<std::size_t>(i)]);
    }
    std::vector<std::vector<BandSpectrum>> sig_upd(n);
    for (int i = 0; i < n; ++i) {
        sig_upd[static_cast<std::size_t>(i)].resize(pairs.size());
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const int a = pairs[p].first, b = pairs[p].second;
            for (std::size_t x = 0; x < npt; ++x) {
                double v = dsig_r[static_cast<std::size_t>(i)][p][x];
                for (int j = 0; j < n; ++j) {
                    v += grad_dphi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][x] *
                         state.sigma_r[static_cast<std::size_t>(j)][p][x];
                    v -= state.phi_r[static_cast<std::size_t>(j)][x] *
                         cov[((static_cast<std::size_t>(i) * n + j) * n + a) * n + b];
                }
                // Minus sign: this is what makes the divergence part cancel
                // the d(a) grad(phi~) product in the residuum evolution (the
                // Helmholtz defect then solves the stochastic-exponential
                // SDE; with a plus sign the defect inflates by d(Psi) terms).
                v -= state.phi_r[static_cast<std::size_t>(i)][x] * dpsi_r[p][x];
                work[x] = v;
            }
            ops.to_band(work, sig_upd[static_cast<std::size_t>(i)][p]);
        }
    }

    // Apply updates.
    for (int i = 0; i < n; ++i)
        for (std::size_t q = 0; q < state.phi[static_cast<std::size_t>(i)].size(); ++q)
            state.phi[static_cast<std::size_t>(i)][q] += phi_upd[static_cast<std::size_t>(i)][q];
    for (int i = 0; i < n; ++i)
        for (std::size_t p = 0; p < pairs.size(); ++p)
            for (std::size_t q = 0; q < state.sigma[static_cast<std::size_t>(i)][p].size(); ++q)
                state.sigma[static_cast<std::size_t>(i)][p][q] +=
                    sig_upd[static_cast<std::size_t>(i)][p][q];
    for (std::size_t p = 0; p < pairs.size(); ++p)
        ops.add_shell(dpsi, pairs[p].first * n + pairs[p].second, state.psi[p]);

    // Refresh real mirrors.
    for (int i = 0; i < n; ++i)
        ops.to_real(state.phi[static_cast<std::size_t>(i)],
                    state.phi_r[static_cast<std::size_t>(i)]);
    for (int i = 0; i < n; ++i)
        for (std::size_t p = 0; p < pairs.size(); ++p)
            ops.to_real(state.sigma[static_cast<std::size_t>(i)][p],
                        state.sigma_r[static_cast<std::size_t>(i)][p]);
    for (std::size_t p = 0; p < pairs.size(); ++p) ops.to_real(state.psi[p], state.psi_r[p]);

    // Norm guard against runaway products.
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (std::size_t x = 0; x < npt; ++x)
            worst = std::max(worst, std::abs(state.phi_r[static_cast<std::size_t>(i)][x]));
    if (worst > 1e8)
        throw std::runtime_error("step_ladder_level: field norm overflow, |phi~| = " +
                                 std::to_string(worst));
    state.level = level + 1;
}

ResiduumStats residuum_from_definition(const LadderState& state, double lambda_tilde,
                                       FftWorkspace&, RealField* field_out) {
    const TorusGrid& grid = state.grid;
    const int n = grid.n;
    const auto pairs = skew_pairs(n);
    BandOps& ops = ops_for(grid);
    const std::size_t npt = ops.npt;

    // grad phi~ in real space.
    std::vector<std::vector<std::vector<double>>> gphi(n);  // [i][j]
    for (int i = 0; i < n; ++i) {
        gphi[static_cast<std::size_t>(i)].resize(n);
        for (int j = 0; j < n; ++j)
            ops.to_real(state.phi[static_cast<std::size_t>(i)],
                        gphi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], j);
    }
    // div sigma~^i in real space: (div sigma^i)^l = d_j sigma^{i,lj}.
    std::vector<std::vector<std::vector<double>>> divs(n);  // [i][l]
    for (int i = 0; i < n; ++i) {
        divs[static_cast<std::size_t>(i)].assign(n, std::vector<double>(npt, 0.0));
        for (int l = 0; l < n; ++l) {
            std::vector<double> tmp;
            for (std::size_t p = 0; p < pairs.size(); ++p) {
                const int a = pairs[p].first, b = pairs[p].second;
                double sign = 0.0;
                int j = -1;
                if (a == l) {
                    sign = 1.0;
                    j = b;
                } else if (b == l) {
                    sign = -1.0;
                    j = a;
                } else {
                    continue;
                }
                ops.to_real(state.sigma[static_cast<std::size_t>(i)][p], tmp, j);
                auto& acc = divs[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)];
                for (std::size_t x = 0; x < npt; ++x) acc[x] += sign * tmp[x];
            }
        }
    }

    ResiduumStats stats;
    stats.mean_f = Eigen::MatrixXd::Zero(n, n);
    if (field_out) {
        field_out->grid = grid;
        field_out->ncomp = n * n;
        field_out->period_over_N_ = grid.period() / grid.real_points;
        field_out->data.assign(static_cast<std::size_t>(n) * n * npt, 0.0);
    }

    double sum_f2 = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double mean_acc = 0.0;
            double* out = field_out ? field_out->comp(i * n + j) : nullptr;
            for (std::size_t x = 0; x < npt; ++x) {
                // f^{ij} = delta_ij + d_j phi~^i + Psi^{ij}
                //        + sum_l Psi^{lj} d_l phi~^i - lambda delta_ij
                //        - (div sigma~^i)^j
                double v = (i == j ? 1.0 - lambda_tilde : 0.0);
                v += gphi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][x];
                // Psi entries from pair storage.
                for (std::size_t p = 0; p < pairs.size(); ++p) {
                    const int a = pairs[p].first, b = pairs[p].second;
                    const double s = state.psi_r[p][x];
                    auto psi_entry = [&](int l, int jj) {
                        if (l == a && jj == b) return s;
                        if (l == b && jj == a) return -s;
                        return 0.0;
                    };
                    v += psi_entry(i, j);
                    for (int l = 0; l < n; ++l)
                        v += psi_entry(l, j) *
                             gphi[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)][x];
                }
                v -= divs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][x];
                if (out) out[x] = v;
                mean_acc += v;
                sum_f2 += v * v;
            }
            stats.mean_f(i, j) = mean_acc / static_cast<double>(npt);
        }
    }
    stats.e_f2 = sum_f2 / static_cast<double>(npt);
    return stats;
}

LadderRunResult run_ladder(const HomogenizeOptions& opts_in) {
    HomogenizeOptions opts = opts_in;
    if (opts.output_levels.empty()) opts.output_levels = {opts.ladder.step_count()};
    const TorusGrid& grid = opts.grid;
    const int n = grid.n;
    const auto pairs = skew_pairs(n);

    LadderRunResult result;
    result.stats.assign(opts.output_levels.size(),
                        std::vector<LevelMoments>(opts.n_realizations));

    parallel_chunks(opts.n_realizations, opts.n_realizations, opts.threads,
                    [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            BandOps& ops = ops_for(grid);
            LadderState st = make_initial_state(grid);
            std::size_t out_idx = 0;
            auto emit = [&](std::size_t level) {
                while (out_idx < opts.output_levels.size() &&
                       opts.output_levels[out_idx] == level) {
                    LevelMoments lm;
                    lm.level = level;
                    lm.L = opts.ladder.levels[level];
                    lm.lambda = opts.ladder.lambdas[level];
                    lm.tau = opts.ladder.taus[level];
                    const std::size_t npt = ops.npt;
                    double p2 = 0.0, p4 = 0.0, s2 = 0.0;
                    for (std::size_t x = 0; x < npt; ++x) {
                        double a2 = 0.0;
                        for (int i = 0; i < n; ++i) {
                            const double v = st.phi_r[static_cast<std::size_t>(i)][x];
                            a2 += v * v;
                        }
                        p2 += a2;
                        p4 += a2 * a2;
                        for (int i = 0; i < n; ++i)
                            for (std::size_t p = 0; p < pairs.size(); ++p) {
                                const double v =
                                    st.sigma_r[static_cast<std::size_t>(i)][p][x];
                                s2 += 2.0 * v * v;  // both (a,b) and (b,a) entries
                            }
                    }
                    lm.e_phi2 = p2 / static_cast<double>(npt);
                    lm.e_phi4 = p4 / static_cast<double>(npt);
                    lm.e_sigma2 = s2 / static_cast<double>(npt);
                    const ResiduumStats rs =
                        residuum_from_definition(st, lm.lambda, ops.ws, nullptr);
                    lm.e_f2 = rs.e_f2;
                    lm.mean_f = rs.mean_f;
                    result.stats[out_idx][r] = lm;
                    ++out_idx;
                }
            };
            emit(0);
            for (std::size_t j = 0; j < opts.ladder.step_count(); ++j) {
                SpectralShellField db;
                try {
                    RngStream rng(opts.seed, substream(0x1adde2, opts.stream_salt,
                                                       r * 4096 + j));
                    db = sample_shell_increment(grid, opts.ladder, j, rng);
                } catch (const EmptyShellError&) {
                    st.level = j + 1;  // nothing to add on this shell
                    emit(j + 1);
                    continue;
                }
                step_ladder_level(st, opts.ladder, j, db, ops.ws);
                emit(j + 1);
            }
        }
    });

    result.mean.resize(opts.output_levels.size());
    for (std::size_t o = 0; o < opts.output_levels.size(); ++o) {
        LevelMoments m = result.stats[o][0];
        m.e_phi2 = m.e_phi4 = m.e_sigma2 = m.e_f2 = 0.0;
        m.mean_f = Eigen::MatrixXd::Zero(n, n);
        for (const auto& s : result.stats[o]) {
            m.e_phi2 += s.e_phi2;
            m.e_phi4 += s.e_phi4;
            m.e_sigma2 += s.e_sigma2;
            m.e_f2 += s.e_f2;
            m.mean_f += s.mean_f;
        }
        const double inv = 1.0 / static_cast<double>(opts.n_realizations);
        m.e_phi2 *= inv;
        m.e_phi4 *= inv;
        m.e_sigma2 *= inv;
        m.e_f2 *= inv;
        m.mean_f *= inv;
        result.mean[o] = m;
    }
    return result;
}

QvResult qv_accumulator(const TorusGrid& grid, const ScaleLadder& ladder, uint64_t seed,
                        std::size_t n_realizations, std::size_t points_per_realization,
                        int threads) {
    if (n_realizations < 100)
        throw std::invalid_argument("qv_accumulator: need >= 100 realizations");
    const int n = grid.n;
    const std::size_t n_chunks = std::min<std::size_t>(128, n_realizations);

    struct Acc {
        Eigen::MatrixXd sym, raw, sym2;
        std::size_t count = 0;
        bool init = false;
    };
    std::vector<Acc> acc(n_chunks);

    parallel_chunks(n_realizations, n_chunks, threads,
                    [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        Acc& a = acc[chunk];
        a.sym = Eigen::MatrixXd::Zero(n, n);
        a.raw = Eigen::MatrixXd::Zero(n, n);
        a.sym2 = Eigen::MatrixXd::Zero(n, n);
        a.init = true;
        Eigen::MatrixXd g(n, n), qv_s(n, n), qv_r(n, n);
        std::vector<double> gbuf(static_cast<std::size_t>(n) * n);
        for (std::size_t r = begin; r < end; ++r) {
            // Probe points spread deterministically from the realization rng.
            RngStream prng(seed, substream(0x9001, r));
            std::vector<std::array<double, 3>> pts(points_per_realization);
            for (auto& p : pts)
                for (int axis = 0; axis < 3; ++axis)
                    p[static_cast<std::size_t>(axis)] =
                        axis < n ? prng.uniform() * grid.period() : 0.0;
            std::vector<Eigen::MatrixXd> qv_sym(pts.size(), Eigen::MatrixXd::Zero(n, n));
            std::vector<Eigen::MatrixXd> qv_raw(pts.size(), Eigen::MatrixXd::Zero(n, n));
            for (std::size_t j = 0; j < ladder.step_count(); ++j) {
                SpectralShellField db;
                try {
                    RngStream rng(seed, substream(0x9002, r, j));
                    db = sample_shell_increment(grid, ladder, j, rng);
                } catch (const EmptyShellError&) {
                    continue;
                }
                const double lam = shell_lambda(grid, ladder, j);
                const SpectralShellField dphi = corrector_increment(db, lam);
                for (std::size_t q = 0; q < pts.size(); ++q) {
                    evaluate_gradient_at(dphi, pts[q].data(), gbuf.data());
                    for (int i = 0; i < n; ++i)
                        for (int jj = 0; jj < n; ++jj)
                            g(i, jj) = gbuf[static_cast<std::size_t>(i) * n + jj];
                    qv_sym[q] += g * g.transpose();
                    qv_raw[q] += g * g;
                }
            }
            for (std::size_t q = 0; q < pts.size(); ++q) {
                a.sym += qv_sym[q];
                a.raw += qv_raw[q];
                a.sym2 += qv_sym[q].cwiseProduct(qv_sym[q]);
                ++a.count;
            }
        }
    });

    QvResult out;
    out.tau_end = ladder.tau_max();
    out.sym = Eigen::MatrixXd::Zero(n, n);
    out.raw = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd sym2 = Eigen::MatrixXd::Zero(n, n);
    for (const auto& a : acc) {
        if (!a.init) continue;
        out.sym += a.sym;
        out.raw += a.raw;
        sym2 += a.sym2;
        out.n_samples += a.count;
    }
    const double inv = 1.0 / static_cast<double>(out.n_samples);
    out.sym *= inv;
    out.raw *= inv;
    sym2 *= inv;
    const double max_var = (sym2 - out.sym.cwiseProduct(out.sym)).maxCoeff();
    out.ci = 1.96 * std::sqrt(std::max(max_var, 0.0) * inv);
    return out;
}

CouplingResult coupled_b_at_points(const TorusGrid& grid, const ScaleLadder& ladder,
                                   const std::vector<std::array<double, 3>>& points,
                                   uint64_t seed, std::size_t n_realizations, int threads) {
    if (points.empty()) throw std::invalid_argument("coupled_b_at_points: no points");
    const int n = grid.n;
    const std::size_t npts = points.size();
    const std::size_t n_chunks = std::min<std::size_t>(128, n_realizations);

    struct Acc {
        Eigen::MatrixXd ebbt, ebb;
        std::vector<double> cross;
        double cross0_sq = 0.0;
        bool init = false;
    };
    std::vector<Acc> acc(n_chunks);

    parallel_chunks(n_realizations, n_chunks, threads,
                    [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        Acc& a = acc[chunk];
        a.ebbt = Eigen::MatrixXd::Zero(n, n);
        a.ebb = Eigen::MatrixXd::Zero(n, n);
        a.cross.assign(npts, 0.0);
        a.init = true;
        std::vector<Eigen::MatrixXd> B(npts, Eigen::MatrixXd::Zero(n, n));
        std::vector<double> gbuf(static_cast<std::size_t>(n) * n);
        for (std::size_t r = begin; r < end; ++r) {
            for (auto& b : B) b.setZero();
            for (std::size_t j = 0; j < ladder.step_count(); ++j) {
                SpectralShellField db;
                try {
                    RngStream rng(seed, substream(0xc0b1, r, j));
                    db = sample_shell_increment(grid, ladder, j, rng);
                } catch (const EmptyShellError&) {
                    continue;
                }
                const double lam = shell_lambda(grid, ladder, j);
                const SpectralShellField dphi = corrector_increment(db, lam);
                for (std::size_t q = 0; q < npts; ++q) {
                    evaluate_gradient_at(dphi, points[q].data(), gbuf.data());
                    for (int i = 0; i < n; ++i)
                        for (int jj = 0; jj < n; ++jj)
                            B[q](i, jj) += gbuf[static_cast<std::size_t>(i) * n + jj];
                }
            }
            a.ebbt += B[0] * B[0].transpose();
            a.ebb += B[0] * B[0];
            for (std::size_t q = 0; q < npts; ++q) {
                const double c = (B[0].cwiseProduct(B[q])).sum() / n;
                a.cross[q] += c;
                if (q == 0) a.cross0_sq += c * c;
            }
        }
    });

    CouplingResult out;
    out.tau_end = ladder.tau_max();
    out.ebbt = Eigen::MatrixXd::Zero(n, n);
    out.ebb = Eigen::MatrixXd::Zero(n, n);
    out.cross.assign(npts, 0.0);
    double cross0_sq = 0.0;
    for (const auto& a : acc) {
        if (!a.init) continue;
        out.ebbt += a.ebbt;
        out.ebb += a.ebb;
        for (std::size_t q = 0; q < npts; ++q) out.cross[q] += a.cross[q];
        cross0_sq += a.cross0_sq;
    }
    const double inv = 1.0 / static_cast<double>(n_realizations);
    out.ebbt *= inv;
    out.ebb *= inv;
    for (auto& c : out.cross) c *= inv;
    cross0_sq *= inv;
    out.ci = 1.96 * std::sqrt(std::max(cross0_sq - out.cross[0] * out.cross[0], 0.0) * inv);

    for (std::size_t q = 0; q < npts; ++q) {
        double d2 = 0.0;
        for (int axis = 0; axis < n; ++axis) {
            double d = points[q][static_cast<std::size_t>(axis)] -
                       points[0][static_cast<std::size_t>(axis)];
            const double P = grid.period();
            d = std::remainder(d, P);
            d2 += d * d;
        }
        out.separations.push_back(std::sqrt(d2));
        const double lnr = std::log(lambda_of_time(d2, ladder.epsilon));
        out.cross_pred.push_back(std::max(out.tau_end - lnr, 0.0));
    }
    return out;
}

double msd_prediction(double T, double epsilon, int n) {
    if (T < 0.0) throw std::invalid_argument("msd_prediction: T must be >= 0");
    return 2.0 * n * lambda_of_time(T, epsilon) * T;
}

}  // namespace curlflow
