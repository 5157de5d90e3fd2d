#include "curlflow/spectral_field.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <unordered_map>

namespace curlflow {

namespace {

std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

inline int64_t norm2(const std::array<int, 3>& m) {
    return static_cast<int64_t>(m[0]) * m[0] + static_cast<int64_t>(m[1]) * m[1] +
           static_cast<int64_t>(m[2]) * m[2];
}

inline bool positive_half(const std::array<int, 3>& m) {
    if (m[0] != 0) return m[0] > 0;
    if (m[1] != 0) return m[1] > 0;
    return m[2] > 0;
}

struct ModeKey {
    std::size_t operator()(const std::array<int, 3>& m) const {
        return static_cast<std::size_t>((m[0] * 73856093) ^ (m[1] * 19349663) ^
                                        (m[2] * 83492791));
    }
};

}  // namespace

TorusGrid::TorusGrid(int n_, int M_, int real_points_) : n(n_), M(M_) {
    if (n != 2 && n != 3) throw std::invalid_argument("TorusGrid: n must be 2 or 3");
    if (M < 1) throw std::invalid_argument("TorusGrid: M must be >= 1");
    real_points = real_points_ > 0 ? real_points_ : 4 * M;
    if (real_points < 2 * M + 1)
        throw std::invalid_argument("TorusGrid: real_points must be >= 2M+1 (alias-free)");

    // Calibrate so that sum over 0 < |m| <= M of amp*(n-1) equals n/4 at
    // eps = 1 (the eps^2 factor is applied per call).
    shape_pow_ = 0.5 * (2.0 - n);
    double shape_sum = 0.0;
    const int64_t M2 = static_cast<int64_t>(M) * M;
    std::array<int, 3> m{0, 0, 0};
    const int zmax = (n == 3) ? M : 0;
    for (m[0] = -M; m[0] <= M; ++m[0])
        for (m[1] = -M; m[1] <= M; ++m[1])
            for (m[2] = -zmax; m[2] <= zmax; ++m[2]) {
                const int64_t m2 = norm2(m);
                if (m2 == 0 || m2 > M2) continue;
                shape_sum += (n == 2)
                                 ? 1.0
                                 : std::pow(static_cast<double>(m2) / static_cast<double>(M2),
                                            shape_pow_);
            }
    cov_const_ = (n / 4.0) / ((n - 1.0) * shape_sum);
}

double TorusGrid::mode_amp(double epsilon, int64_t m2) const {
    const double e2 = epsilon * epsilon;
    if (n == 2) return cov_const_ * e2;
    const double M2 = static_cast<double>(M) * M;
    return cov_const_ * e2 * std::pow(static_cast<double>(m2) / M2, shape_pow_);
}

double SpectralShellField::k2(std::size_t mode) const {
    return static_cast<double>(norm2(modes[mode])) / (static_cast<double>(grid.M) * grid.M);
}

std::vector<std::array<int, 3>> shell_modes(const TorusGrid& grid, double L_lo, double L_hi) {
    if (!(L_hi > L_lo) || L_lo < 1.0)
        throw std::invalid_argument("shell_modes: need 1 <= L_lo < L_hi");
    const double M = grid.M;
    const double hi2 = (M / L_lo) * (M / L_lo);  // |m|^2 <= hi2
    const double lo2 = (M / L_hi) * (M / L_hi);  // |m|^2 >  lo2
    std::vector<std::array<int, 3>> out;
    std::array<int, 3> m{0, 0, 0};
    const int mmax = grid.M;
    const int zmax = (grid.n == 3) ? mmax : 0;
    for (m[0] = -mmax; m[0] <= mmax; ++m[0])
        for (m[1] = -mmax; m[1] <= mmax; ++m[1])
            for (m[2] = -zmax; m[2] <= zmax; ++m[2]) {
                const auto m2 = static_cast<double>(norm2(m));
                if (m2 > lo2 && m2 <= hi2 && norm2(m) != 0) out.push_back(m);
            }
    return out;
}

SpectralShellField sample_shell(const TorusGrid& grid, double epsilon, double L_lo,
                                double L_hi, RngStream& rng) {
    SpectralShellField f;
    f.grid = grid;
    f.L_lo = L_lo;
    f.L_hi = L_hi;
    f.rank = FieldRank::Vector;
    f.ncomp = grid.n;
    f.modes = shell_modes(grid, L_lo, L_hi);
    if (f.modes.empty())
        throw EmptyShellError("sample_shell: no modes in (" + std::to_string(L_lo) + ", " +
                              std::to_string(L_hi) + "]");
    f.coeffs.assign(f.modes.size() * f.ncomp, cplx(0.0, 0.0));

    std::unordered_map<std::array<int, 3>, std::size_t, ModeKey> index;
    index.reserve(f.modes.size() * 2);
    for (std::size_t i = 0; i < f.modes.size(); ++i) index.emplace(f.modes[i], i);

    const int n = grid.n;
    const double kSqrt1_2 = 0.70710678118654752440;
    for (std::size_t i = 0; i < f.modes.size(); ++i) {
        const auto& m = f.modes[i];
        if (!positive_half(m)) continue;
        const int64_t m2 = norm2(m);
        const double amp = grid.mode_amp(epsilon, m2);
        const double sa = std::sqrt(amp);
        // khat
        double kh[3] = {0, 0, 0};
        const double inv = 1.0 / std::sqrt(static_cast<double>(m2));
        for (int a = 0; a < n; ++a) kh[a] = m[a] * inv;
        // Complex standard normal per component, projected transverse.
        cplx z[3];
        for (int a = 0; a < n; ++a)
            z[a] = cplx(rng.normal() * kSqrt1_2, rng.normal() * kSqrt1_2);
        cplx kz(0.0, 0.0);
        for (int a = 0; a < n; ++a) kz += kh[a] * z[a];
        cplx* c = f.at(i);
        for (int a = 0; a < n; ++a) c[a] = sa * (z[a] - kh[a] * kz);
        // Hermitian mirror.
        const std::array<int, 3> neg{-m[0], -m[1], -m[2]};
        cplx* cm = f.at(index.at(neg));
        for (int a = 0; a < n; ++a) cm[a] = std::conj(c[a]);
    }
    return f;
}

SpectralShellField sample_shell_increment(const TorusGrid& grid, const ScaleLadder& ladder,
                                          std::size_t level, RngStream& rng) {
    if (level + 1 >= ladder.levels.size())
        throw std::invalid_argument("sample_shell_increment: level out of range");
    return sample_shell(grid, ladder.epsilon, ladder.levels[level], ladder.levels[level + 1],
                        rng);
}

SpectralShellField stream_increment(const SpectralShellField& db) {
    if (db.rank != FieldRank::Vector)
        throw std::invalid_argument("stream_increment: input must be a vector field");
    const int n = db.grid.n;
    SpectralShellField psi;
    psi.grid = db.grid;
    psi.L_lo = db.L_lo;
    psi.L_hi = db.L_hi;
    psi.rank = FieldRank::SkewTensor;
    psi.ncomp = n * n;
    psi.modes = db.modes;
    psi.coeffs.assign(psi.modes.size() * psi.ncomp, cplx(0.0, 0.0));
    const cplx iu(0.0, 1.0);
    for (std::size_t q = 0; q < db.modes.size(); ++q) {
        const auto& m = db.modes[q];
        if (norm2(m) == 0) throw std::invalid_argument("stream_increment: k=0 mode present");
        const double k2 = db.k2(q);
        const cplx* b = db.at(q);
        cplx* p = psi.at(q);
        for (int i = 0; i < n; ++i) {
            const double ki = db.kvec(q, i);
            for (int j = 0; j < n; ++j) {
                const double kj = db.kvec(q, j);
                p[i * n + j] = iu / k2 * (ki * b[j] - b[i] * kj);
            }
        }
    }
    return psi;
}

SpectralShellField corrector_increment(const SpectralShellField& db, double lambda) {
    if (db.rank != FieldRank::Vector)
        throw std::invalid_argument("corrector_increment: input must be a vector field");
    SpectralShellField phi = db;
    for (std::size_t q = 0; q < phi.modes.size(); ++q) {
        if (norm2(phi.modes[q]) == 0)
            throw std::invalid_argument("corrector_increment: k=0 mode present");
        const double f = 1.0 / (lambda * phi.k2(q));
        cplx* c = phi.at(q);
        for (int a = 0; a < phi.ncomp; ++a) c[a] *= f;
    }
    return phi;
}

SpectralShellField sigma_increment(const SpectralShellField& db, double lambda) {
    if (db.rank != FieldRank::Vector)
        throw std::invalid_argument("sigma_increment: input must be a vector field");
    const int n = db.grid.n;
    SpectralShellField sig;
    sig.grid = db.grid;
    sig.L_lo = db.L_lo;
    sig.L_hi = db.L_hi;
    sig.rank = FieldRank::SkewPerCoord;
    sig.ncomp = n * n * n;
    sig.modes = db.modes;
    sig.coeffs.assign(sig.modes.size() * sig.ncomp, cplx(0.0, 0.0));
    const cplx iu(0.0, 1.0);
    for (std::size_t q = 0; q < db.modes.size(); ++q) {
        const auto& m = db.modes[q];
        if (norm2(m) == 0) throw std::invalid_argument("sigma_increment: k=0 mode present");
        const double k2 = db.k2(q);
        const cplx* b = db.at(q);
        double k[3] = {0, 0, 0};
        for (int a = 0; a < n; ++a) k[a] = db.kvec(q, a);
        for (int i = 0; i < n; ++i) {
            // w^i_j = dPsi^{ij} + lambda (i k_j) dphi^i
            //       = (i/k2) (k_i b_j - b_i k_j + k_j b_i) = (i/k2) k_i b_j.
            // (The lambda grad(dphi) part cancels the -b_i k_j term.)
            cplx w[3];
            for (int j = 0; j < n; ++j) w[j] = iu / k2 * (k[i] * b[j]);
            cplx* s = sig.at(q) + i * n * n;
            for (int l = 0; l < n; ++l)
                for (int j = 0; j < n; ++j)
                    s[l * n + j] = iu / k2 * (k[l] * w[j] - w[l] * k[j]);
        }
    }
    return sig;
}

double shell_variance(const TorusGrid& grid, double epsilon, double L_lo, double L_hi) {
    double s = 0.0;
    for (const auto& m : shell_modes(grid, L_lo, L_hi))
        s += grid.mode_amp(epsilon, norm2(m)) * (grid.n - 1);
    return s;
}

double shell_qv_trace(const TorusGrid& grid, double epsilon, double L_lo, double L_hi) {
    double s = 0.0;
    const double M2 = static_cast<double>(grid.M) * grid.M;
    for (const auto& m : shell_modes(grid, L_lo, L_hi)) {
        const double k2 = static_cast<double>(norm2(m)) / M2;
        s += grid.mode_amp(epsilon, norm2(m)) * (grid.n - 1) / k2;
    }
    return s;
}

double shell_psi_variance(const TorusGrid& grid, double epsilon, double L_lo, double L_hi) {
    // |dPsi|^2_F per mode = 2 |b|^2 / k2 for transverse b.
    double s = 0.0;
    const double M2 = static_cast<double>(grid.M) * grid.M;
    for (const auto& m : shell_modes(grid, L_lo, L_hi)) {
        const double k2 = static_cast<double>(norm2(m)) / M2;
        s += 2.0 * grid.mode_amp(epsilon, norm2(m)) * (grid.n - 1) / k2;
    }
    return s;
}

std::vector<double> phi_psi_covariation(const TorusGrid& grid, double epsilon,
                                        double lambda, double L_lo, double L_hi) {
    const int n = grid.n;
    std::vector<double> c(static_cast<std::size_t>(n) * n * n * n, 0.0);
    const double M2 = static_cast<double>(grid.M) * grid.M;
    for (const auto& mm : shell_modes(grid, L_lo, L_hi)) {
        const int64_t m2i = norm2(mm);
        const double k2 = static_cast<double>(m2i) / M2;
        const double amp = grid.mode_amp(epsilon, m2i);
        double k[3] = {0, 0, 0};
        for (int a = 0; a < n; ++a) k[a] = static_cast<double>(mm[a]) / grid.M;
        const double pref = amp / (lambda * k2 * k2);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l)
                    for (int m = 0; m < n; ++m) {
                        const double Pim = (i == m ? 1.0 : 0.0) - k[i] * k[m] / k2;
                        const double Pil = (i == l ? 1.0 : 0.0) - k[i] * k[l] / k2;
                        c[((static_cast<std::size_t>(i) * n + j) * n + l) * n + m] +=
                            pref * k[j] * (k[l] * Pim - Pil * k[m]);
                    }
    }
    return c;
}

std::size_t RealField::points() const {
    std::size_t p = 1;
    for (int a = 0; a < grid.n; ++a) p *= static_cast<std::size_t>(grid.real_points);
    return p;
}

// ---------------------------------------------------------------------------

FftWorkspace::FftWorkspace(const TorusGrid& grid) : grid_(grid) {
    const int N = grid.real_points;
    npt_ = 1;
    for (int a = 0; a < grid.n; ++a) npt_ *= static_cast<std::size_t>(N);
    buf_ = static_cast<cplx*>(fftw_malloc(sizeof(cplx) * npt_));
    if (!buf_) throw std::bad_alloc();
    std::lock_guard<std::mutex> lock(fftw_mutex());
    auto* fb = reinterpret_cast<fftw_complex*>(buf_);
    if (grid.n == 2) {
        plan_fwd_ = fftw_plan_dft_2d(N, N, fb, fb, FFTW_FORWARD, FFTW_ESTIMATE);
        plan_bwd_ = fftw_plan_dft_2d(N, N, fb, fb, FFTW_BACKWARD, FFTW_ESTIMATE);
    } else {
        plan_fwd_ = fftw_plan_dft_3d(N, N, N, fb, fb, FFTW_FORWARD, FFTW_ESTIMATE);
        plan_bwd_ = fftw_plan_dft_3d(N, N, N, fb, fb, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
}

FftWorkspace::~FftWorkspace() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    if (plan_bwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
    if (buf_) fftw_free(buf_);
}

std::size_t FftWorkspace::wrap(const std::array<int, 3>& m) const {
    const int N = grid_.real_points;
    std::size_t idx = 0;
    for (int a = 0; a < grid_.n; ++a) {
        int v = m[a] % N;
        if (v < 0) v += N;
        idx = idx * static_cast<std::size_t>(N) + static_cast<std::size_t>(v);
    }
    return idx;
}

void FftWorkspace::clear() { std::memset(buf_, 0, sizeof(cplx) * npt_); }

void FftWorkspace::load_shell(const SpectralShellField& field, int comp, int deriv_axis,
                              bool accumulate) {
    if (!accumulate) clear();
    const cplx iu(0.0, 1.0);
    for (std::size_t q = 0; q < field.modes.size(); ++q) {
        cplx v = field.at(q)[comp];
        if (deriv_axis >= 0) v *= iu * field.kvec(q, deriv_axis);
        buf_[wrap(field.modes[q])] += v;
    }
}

double FftWorkspace::backward(double* out) {
    fftw_execute_dft(static_cast<fftw_plan>(plan_bwd_),
                     reinterpret_cast<fftw_complex*>(buf_),
                     reinterpret_cast<fftw_complex*>(buf_));
    double max_imag = 0.0;
    for (std::size_t i = 0; i < npt_; ++i) {
        out[i] = buf_[i].real();
        max_imag = std::max(max_imag, std::abs(buf_[i].imag()));
    }
    return max_imag;
}

void FftWorkspace::forward(const double* in) {
    for (std::size_t i = 0; i < npt_; ++i) buf_[i] = cplx(in[i], 0.0);
    fftw_execute_dft(static_cast<fftw_plan>(plan_fwd_),
                     reinterpret_cast<fftw_complex*>(buf_),
                     reinterpret_cast<fftw_complex*>(buf_));
    const double norm = 1.0 / static_cast<double>(npt_);
    for (std::size_t i = 0; i < npt_; ++i) buf_[i] *= norm;
}

cplx FftWorkspace::band_coeff(const std::array<int, 3>& m) const { return buf_[wrap(m)]; }

void FftWorkspace::set_band_coeff(const std::array<int, 3>& m, cplx v) { buf_[wrap(m)] = v; }

void FftWorkspace::apply_derivative(int axis) {
    // Operates on the band |m| <= M only; assumes out-of-band content is
    // irrelevant (it is zeroed by band projection in callers).
    const int M = grid_.M;
    const int64_t M2 = static_cast<int64_t>(M) * M;
    std::array<int, 3> m{0, 0, 0};
    const int zmax = (grid_.n == 3) ? M : 0;
    const cplx iu(0.0, 1.0);
    for (m[0] = -M; m[0] <= M; ++m[0])
        for (m[1] = -M; m[1] <= M; ++m[1])
            for (m[2] = -zmax; m[2] <= zmax; ++m[2]) {
                if (norm2(m) > M2) continue;
                buf_[wrap(m)] *= iu * (static_cast<double>(m[axis]) / M);
            }
}

namespace {

RealField synthesize_impl(const SpectralShellField& field, int deriv_axis) {
    if (!hermitian_ok(field))
        throw std::runtime_error("synthesize_realspace: Hermitian symmetry violated");
    RealField out;
    out.grid = field.grid;
    out.ncomp = field.ncomp;
    out.period_over_N_ = field.grid.period() / field.grid.real_points;
    std::size_t npt = 1;
    for (int a = 0; a < field.grid.n; ++a)
        npt *= static_cast<std::size_t>(field.grid.real_points);
    out.data.assign(static_cast<std::size_t>(field.ncomp) * npt, 0.0);
    FftWorkspace ws(field.grid);
    double max_imag = 0.0, sumsq = 0.0;
    for (int c = 0; c < field.ncomp; ++c) {
        ws.load_shell(field, c, deriv_axis);
        max_imag = std::max(max_imag, ws.backward(out.comp(c)));
        for (std::size_t i = 0; i < npt; ++i) sumsq += out.comp(c)[i] * out.comp(c)[i];
    }
    const double rms = std::sqrt(sumsq / (static_cast<double>(npt) * field.ncomp));
    if (rms > 0.0 && max_imag > 1e-10 * rms)
        throw std::runtime_error("synthesize_realspace: imaginary residue too large");
    return out;
}

}  // namespace

RealField synthesize_realspace(const SpectralShellField& field) {
    return synthesize_impl(field, -1);
}

RealField synthesize_gradient(const SpectralShellField& field, int axis) {
    return synthesize_impl(field, axis);
}

void evaluate_at(const SpectralShellField& field, const double* point, double* out) {
    const int n = field.grid.n;
    const double invM = 1.0 / field.grid.M;
    std::vector<cplx> acc(static_cast<std::size_t>(field.ncomp), cplx(0, 0));
    for (std::size_t q = 0; q < field.modes.size(); ++q) {
        double phase = 0.0;
        for (int a = 0; a < n; ++a) phase += field.modes[q][a] * invM * point[a];
        const cplx e(std::cos(phase), std::sin(phase));
        const cplx* c = field.at(q);
        for (int a = 0; a < field.ncomp; ++a) acc[static_cast<std::size_t>(a)] += c[a] * e;
    }
    for (int a = 0; a < field.ncomp; ++a) out[a] = acc[static_cast<std::size_t>(a)].real();
}

void evaluate_gradient_at(const SpectralShellField& field, const double* point, double* out) {
    if (field.rank != FieldRank::Vector)
        throw std::invalid_argument("evaluate_gradient_at: vector fields only");
    const int n = field.grid.n;
    const double invM = 1.0 / field.grid.M;
    std::vector<cplx> acc(static_cast<std::size_t>(n) * n, cplx(0, 0));
    for (std::size_t q = 0; q < field.modes.size(); ++q) {
        double phase = 0.0;
        for (int a = 0; a < n; ++a) phase += field.modes[q][a] * invM * point[a];
        const cplx e(-std::sin(phase), std::cos(phase));  // i*e^{i phase}
        const cplx* c = field.at(q);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                acc[static_cast<std::size_t>(i) * n + j] += c[i] * field.kvec(q, j) * e;
    }
    for (int a = 0; a < n * n; ++a) out[a] = acc[static_cast<std::size_t>(a)].real();
}

double max_divergence(const SpectralShellField& field) {
    if (field.rank != FieldRank::Vector) return 0.0;
    double worst = 0.0;
    for (std::size_t q = 0; q < field.modes.size(); ++q) {
        cplx s(0, 0);
        for (int a = 0; a < field.grid.n; ++a) s += field.kvec(q, a) * field.at(q)[a];
        worst = std::max(worst, std::abs(s));
    }
    return worst;
}

double max_skew_defect(const SpectralShellField& field) {
    const int n = field.grid.n;
    double worst = 0.0;
    const int blocks = field.rank == FieldRank::SkewPerCoord ? n : 1;
    if (field.rank == FieldRank::Vector) return 0.0;
    for (std::size_t q = 0; q < field.modes.size(); ++q)
        for (int b = 0; b < blocks; ++b) {
            const cplx* c = field.at(q) + b * n * n;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    worst = std::max(worst, std::abs(c[i * n + j] + c[j * n + i]));
        }
    return worst;
}

bool hermitian_ok(const SpectralShellField& field, double tol) {
    std::unordered_map<std::array<int, 3>, std::size_t, ModeKey> index;
    index.reserve(field.modes.size() * 2);
    for (std::size_t i = 0; i < field.modes.size(); ++i) index.emplace(field.modes[i], i);
    double scale = 0.0;
    for (const auto& c : field.coeffs) scale = std::max(scale, std::abs(c));
    for (std::size_t i = 0; i < field.modes.size(); ++i) {
        const auto& m = field.modes[i];
        const std::array<int, 3> neg{-m[0], -m[1], -m[2]};
        const auto it = index.find(neg);
        if (it == index.end()) return false;
        const cplx* a = field.at(i);
        const cplx* b = field.at(it->second);
        for (int comp = 0; comp < field.ncomp; ++comp)
            if (std::abs(a[comp] - std::conj(b[comp])) > tol * (1.0 + scale)) return false;
    }
    return true;
}

}  // namespace curlflow
