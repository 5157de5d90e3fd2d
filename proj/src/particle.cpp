#include "curlflow/particle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "curlflow/homogenize.hpp"
#include "curlflow/parallel.hpp"
#include "curlflow/scale_ladder.hpp"

namespace curlflow {

namespace {

// Keys cubic-convolution kernel (a = -1/2); interpolating: w(0)=1, w(+-1)=0.
inline void cubic_weights(double u, double w[4]) {
    const double u2 = u * u, u3 = u2 * u;
    w[0] = -0.5 * (u3 - 2.0 * u2 + u);
    w[1] = 1.5 * u3 - 2.5 * u2 + 1.0;
    w[2] = -1.5 * u3 + 2.0 * u2 + 0.5 * u;
    w[3] = 0.5 * (u3 - u2);
}

}  // namespace

FieldInterpolant::FieldInterpolant(RealField field, InterpOrder order)
    : field_(std::move(field)), order_(order) {
    if (order_ == InterpOrder::TrigExact)
        throw std::invalid_argument(
            "FieldInterpolant: trig-exact needs the spectral constructor");
    if (field_.grid.real_points < 2 * field_.grid.M)
        throw std::invalid_argument("FieldInterpolant: insufficient oversampling for bicubic");
    for (double v : field_.data) max_abs_ = std::max(max_abs_, std::abs(v));
}

FieldInterpolant::FieldInterpolant(const SpectralShellField& spec, InterpOrder order)
    : order_(order), spec_modes_(spec.modes), spec_coeffs_(spec.coeffs),
      spec_ncomp_(spec.ncomp) {
    field_ = synthesize_realspace(spec);
    for (double v : field_.data) max_abs_ = std::max(max_abs_, std::abs(v));
    if (order_ == InterpOrder::Bicubic && field_.grid.real_points < 2 * field_.grid.M)
        throw std::invalid_argument("FieldInterpolant: insufficient oversampling for bicubic");
}

void FieldInterpolant::eval_trig(const double* point, double* out) const {
    const int n = field_.grid.n;
    const double invM = 1.0 / field_.grid.M;
    std::vector<cplx> acc(static_cast<std::size_t>(spec_ncomp_), cplx(0, 0));
    for (std::size_t q = 0; q < spec_modes_.size(); ++q) {
        double phase = 0.0;
        for (int a = 0; a < n; ++a) phase += spec_modes_[q][a] * invM * point[a];
        const cplx e(std::cos(phase), std::sin(phase));
        for (int c = 0; c < spec_ncomp_; ++c)
            acc[static_cast<std::size_t>(c)] +=
                spec_coeffs_[q * static_cast<std::size_t>(spec_ncomp_) +
                             static_cast<std::size_t>(c)] * e;
    }
    for (int c = 0; c < spec_ncomp_; ++c) out[c] = acc[static_cast<std::size_t>(c)].real();
}

void FieldInterpolant::eval_cubic(const double* point, double* out) const {
    const int n = field_.grid.n;
    const int N = field_.grid.real_points;
    const double h = field_.grid.period() / N;

    int base[3] = {0, 0, 0};
    double w[3][4];
    for (int a = 0; a < n; ++a) {
        double s = point[a] / h;
        s -= std::floor(s / N) * N;  // into [0, N)
        const double fl = std::floor(s);
        base[a] = static_cast<int>(fl);
        cubic_weights(s - fl, w[a]);
    }
    auto wrapped = [N](int i) {
        i %= N;
        return i < 0 ? i + N : i;
    };

    for (int c = 0; c < field_.ncomp; ++c) {
        const double* f = field_.comp(c);
        double acc = 0.0;
        if (n == 2) {
            for (int dy = 0; dy < 4; ++dy) {
                const int y = wrapped(base[1] + dy - 1);
                double racc = 0.0;
                for (int dx = 0; dx < 4; ++dx) {
                    const int x = wrapped(base[0] + dx - 1);
                    racc += w[0][dx] * f[static_cast<std::size_t>(x) * N + y];
                }
                acc += w[1][dy] * racc;
            }
        } else {
            for (int dz = 0; dz < 4; ++dz) {
                const int z = wrapped(base[2] + dz - 1);
                double zacc = 0.0;
                for (int dy = 0; dy < 4; ++dy) {
                    const int y = wrapped(base[1] + dy - 1);
                    double racc = 0.0;
                    for (int dx = 0; dx < 4; ++dx) {
                        const int x = wrapped(base[0] + dx - 1);
                        racc += w[0][dx] *
                                f[(static_cast<std::size_t>(x) * N + y) * N + z];
                    }
                    zacc += w[1][dy] * racc;
                }
                acc += w[2][dz] * zacc;
            }
        }
        out[c] = acc;
    }
}

void FieldInterpolant::eval(const double* point, double* out) const {
    if (order_ == InterpOrder::TrigExact)
        eval_trig(point, out);
    else
        eval_cubic(point, out);
}

double FieldInterpolant::probe_error(std::size_t n_probes, RngStream& rng) const {
    if (spec_modes_.empty())
        throw std::logic_error("probe_error: no spectral data available");
    const int n = field_.grid.n;
    std::vector<double> a(static_cast<std::size_t>(field_.ncomp)),
        b(static_cast<std::size_t>(field_.ncomp));
    double worst = 0.0;
    double pt[3] = {0, 0, 0};
    for (std::size_t p = 0; p < n_probes; ++p) {
        for (int axis = 0; axis < n; ++axis) pt[axis] = rng.uniform() * field_.grid.period();
        eval_cubic(pt, a.data());
        eval_trig(pt, b.data());
        for (int c = 0; c < field_.ncomp; ++c)
            worst = std::max(worst, std::abs(a[static_cast<std::size_t>(c)] -
                                             b[static_cast<std::size_t>(c)]));
    }
    return worst;
}

double FieldInterpolant::divergence_probe(std::size_t n_probes, RngStream& rng) const {
    const int n = field_.grid.n;
    if (field_.ncomp != n)
        throw std::logic_error("divergence_probe: needs a vector field");
    const double h = 0.25 * field_.grid.period() / field_.grid.real_points;
    std::vector<double> plus(static_cast<std::size_t>(n)), minus(static_cast<std::size_t>(n));
    double sum_div2 = 0.0, sum_grad2 = 0.0;
    double pt[3] = {0, 0, 0};
    for (std::size_t p = 0; p < n_probes; ++p) {
        for (int axis = 0; axis < n; ++axis) pt[axis] = rng.uniform() * field_.grid.period();
        double div = 0.0, grad2 = 0.0;
        for (int axis = 0; axis < n; ++axis) {
            double q[3] = {pt[0], pt[1], pt[2]};
            q[axis] = pt[axis] + h;
            eval(q, plus.data());
            q[axis] = pt[axis] - h;
            eval(q, minus.data());
            for (int c = 0; c < n; ++c) {
                const double d = (plus[static_cast<std::size_t>(c)] -
                                  minus[static_cast<std::size_t>(c)]) / (2.0 * h);
                grad2 += d * d;
                if (c == axis) div += d;
            }
        }
        sum_div2 += div * div;
        sum_grad2 += grad2;
    }
    return sum_grad2 > 0.0 ? std::sqrt(sum_div2 / sum_grad2) : 0.0;
}

namespace {

struct PathStats {
    double sum_x2 = 0.0;
    Eigen::MatrixXd xxt;
    std::size_t count = 0;
};

PathStats run_paths(const FieldInterpolant* interp, int n, double period, double T,
                    double dt, std::size_t n_paths, uint64_t seed, uint64_t salt,
                    bool average_start_cell) {
    PathStats st;
    st.xxt = Eigen::MatrixXd::Zero(n, n);
    const auto n_steps = static_cast<std::size_t>(std::llround(T / dt));
    const double rt = std::sqrt(2.0 * dt);
    std::vector<double> b(static_cast<std::size_t>(n), 0.0);
    for (std::size_t p = 0; p < n_paths; ++p) {
        RngStream rng(seed, substream(0xd1f, salt, p));
        double x[3] = {0, 0, 0};       // unwrapped displacement
        double x0[3] = {0, 0, 0};      // starting point inside the cell
        if (average_start_cell && interp)
            for (int a = 0; a < n; ++a) x0[a] = rng.uniform() * period;
        for (std::size_t k = 0; k < n_steps; ++k) {
            if (interp) {
                double q[3] = {0, 0, 0};
                for (int a = 0; a < n; ++a) {
                    q[a] = std::fmod(x0[a] + x[a], period);
                    if (q[a] < 0.0) q[a] += period;
                }
                interp->eval(q, b.data());
            }
            for (int a = 0; a < n; ++a) {
                const double drift = interp ? b[static_cast<std::size_t>(a)] : 0.0;
                x[a] += drift * dt + rt * rng.normal();
            }
        }
        double r2 = 0.0;
        for (int a = 0; a < n; ++a) r2 += x[a] * x[a];
        st.sum_x2 += r2;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) st.xxt(i, j) += x[i] * x[j];
        ++st.count;
    }
    return st;
}

}  // namespace

MsdResult simulate_msd_frozen(const FieldInterpolant& interp, double T, double dt,
                              std::size_t n_paths, uint64_t seed, int threads,
                              bool average_start_cell) {
    const int n = interp.grid().n;
    const double period = interp.grid().period();
    const std::size_t n_chunks = std::min<std::size_t>(64, n_paths);
    std::vector<PathStats> acc(n_chunks);
    parallel_chunks(n_paths, n_chunks, threads,
                    [&](std::size_t c, std::size_t begin, std::size_t end) {
        acc[c] = run_paths(&interp, n, period, T, dt, end - begin, seed, begin,
                           average_start_cell);
    });
    MsdResult out;
    out.T = T;
    out.dt_used = dt;
    out.b_inf = interp.max_abs();
    out.xxt = Eigen::MatrixXd::Zero(n, n);
    std::vector<double> chunk_means;
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& a : acc) {
        if (a.count == 0) continue;
        sum += a.sum_x2;
        count += a.count;
        out.xxt += a.xxt;
        chunk_means.push_back(a.sum_x2 / static_cast<double>(a.count));
    }
    out.xxt /= static_cast<double>(count);
    out.msd.value = sum / static_cast<double>(count);
    out.msd.n_samples = count;
    if (chunk_means.size() > 1)
        out.msd.ci_half_width = 1.96 * std::sqrt(variance(chunk_means) /
                                                 static_cast<double>(chunk_means.size()));
    out.ratio = out.msd.value / (2.0 * n * T);
    return out;
}

MsdResult simulate_msd(const ParticleOptions& opts) {
    const int n = opts.n;
    if (opts.T < 0.0) throw std::invalid_argument("simulate_msd: T must be >= 0");

    MsdResult out;
    out.T = opts.T;
    out.prediction = msd_prediction(opts.T, opts.epsilon, n);

    if (opts.epsilon == 0.0) {
        // Pure thermal motion: no field.
        const double dt = opts.dt > 0.0 ? opts.dt : 0.1;
        const std::size_t n_chunks = 64;
        const std::size_t total = opts.n_paths * std::max<std::size_t>(opts.n_fields, 1);
        std::vector<PathStats> acc(n_chunks);
        parallel_chunks(total, n_chunks, opts.threads,
                        [&](std::size_t c, std::size_t begin, std::size_t end) {
            acc[c] = run_paths(nullptr, n, 1.0, opts.T, dt, end - begin, opts.seed, begin,
                               false);
        });
        double sum = 0.0;
        std::size_t count = 0;
        out.xxt = Eigen::MatrixXd::Zero(n, n);
        std::vector<double> chunk_means;
        for (const auto& a : acc) {
            if (a.count == 0) continue;
            sum += a.sum_x2;
            count += a.count;
            out.xxt += a.xxt;
            chunk_means.push_back(a.sum_x2 / static_cast<double>(a.count));
        }
        out.xxt /= static_cast<double>(count);
        out.msd.value = sum / static_cast<double>(count);
        out.msd.n_samples = count;
        out.msd.ci_half_width = 1.96 * std::sqrt(variance(chunk_means) /
                                                 static_cast<double>(chunk_means.size()));
        out.dt_used = dt;
        out.ratio = out.msd.value / (2.0 * n * opts.T);
        return out;
    }

    const double L_ir = opts.L_ir > 0.0 ? opts.L_ir : std::sqrt(1.0 + opts.T);
    TorusGrid grid(n, opts.M);
    const double lamT = lambda_of_time(opts.T, opts.epsilon);
    if (grid.period() < 8.0 * std::sqrt(lamT * opts.T))
        throw std::runtime_error(
            "simulate_msd: torus too small for horizon; increase M to at least " +
            std::to_string(static_cast<int>(std::ceil(8.0 * std::sqrt(lamT * opts.T) /
                                                      6.283185307179586))));
    if (L_ir <= 1.0) throw std::invalid_argument("simulate_msd: IR cutoff must exceed 1");

    // One field per outer draw; inner thermal ensemble; fields in parallel.
    std::vector<double> field_means(opts.n_fields, 0.0);
    std::vector<Eigen::MatrixXd> field_xxt(opts.n_fields);
    std::vector<double> field_dt(opts.n_fields, 0.0), field_binf(opts.n_fields, 0.0);
    parallel_chunks(opts.n_fields, opts.n_fields, opts.threads,
                    [&](std::size_t f, std::size_t, std::size_t) {
        RngStream frng(opts.seed, substream(0xf1e1d, f));
        const SpectralShellField b = sample_shell(grid, opts.epsilon, 1.0, L_ir, frng);
        const FieldInterpolant interp(b, opts.order);
        const double dt =
            opts.dt > 0.0 ? opts.dt : 0.1 / (1.0 + interp.max_abs());
        const PathStats st = run_paths(&interp, n, grid.period(), opts.T, dt,
                                       opts.n_paths, opts.seed, 0x77000 + f, true);
        field_means[f] = st.sum_x2 / static_cast<double>(st.count);
        field_xxt[f] = st.xxt / static_cast<double>(st.count);
        field_dt[f] = dt;
        field_binf[f] = interp.max_abs();
    });

    out.per_field = field_means;
    out.msd.value = mean(field_means);
    out.msd.n_samples = opts.n_fields * opts.n_paths;
    out.msd.ci_half_width =
        t_quantile_975(opts.n_fields - 1) *
        std::sqrt(variance(field_means) / static_cast<double>(opts.n_fields));
    out.msd.batch_means = true;
    out.xxt = Eigen::MatrixXd::Zero(n, n);
    for (const auto& m : field_xxt) out.xxt += m / static_cast<double>(opts.n_fields);
    out.dt_used = field_dt[0];
    out.b_inf = *std::max_element(field_binf.begin(), field_binf.end());
    out.ratio = out.msd.value / (2.0 * n * opts.T);
    return out;
}

std::vector<MsdRow> msd_report(const std::vector<MsdResult>& results, double epsilon,
                               int n) {
    std::vector<MsdRow> rows;
    for (const auto& r : results) {
        MsdRow row;
        row.T = r.T;
        row.msd = r.msd.value;
        row.ci = r.msd.ci_half_width;
        row.prediction = msd_prediction(r.T, epsilon, n);
        row.lambda_T = lambda_of_time(r.T, epsilon);
        row.ratio_to_2nT = r.T > 0.0 ? r.msd.value / (2.0 * n * r.T) : 0.0;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace curlflow
