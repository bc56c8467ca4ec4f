#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "conetomo/beam.hpp"
#include "conetomo/fft.hpp"
#include "conetomo/gridfield.hpp"
#include "conetomo/parallel.hpp"
#include "conetomo/phantom.hpp"
#include "conetomo/report.hpp"
#include "conetomo/vec.hpp"

namespace conetomo {

// ---------------------------------------------------------------------------
// Grid conventions for the planar-detector pipeline (dims M = N-1):
//   abar lattice:  a_i = -a_max + i*da,          da = 2 a_max/(na-1), i < na
//   pbar grid:     p_j = -p_max + j*dp,          dp = 2 p_max/np,     j < np
//   xi grid:       xi_m = (m - np/2)*dxi,        dxi = pi/p_max   (= 2pi/(np dp))
//   sigma grid:    sigma_i = (i - nsig/2)*dsig,  dsig = 2 sigma_max/nsig
//   t grid:        t_l = (l - nsig/2)*dt,        dt = pi/sigma_max
// All discrete transforms are Riemann-sum approximations of the continuous
// ones, spacing factors explicit, e^{-i p.xi} forward with no prefactor and
// (2 pi)^{-n} on the double inverse.
// ---------------------------------------------------------------------------

namespace detail {

template <int M>
std::int64_t cube_count(int n) {
    std::int64_t c = 1;
    for (int i = 0; i < M; ++i) c *= n;
    return c;
}

template <int M>
std::array<int, M> cube_unflat(std::int64_t f, int n) {
    std::array<int, M> idx{};
    for (int i = M - 1; i >= 0; --i) {
        idx[i] = static_cast<int>(f % n);
        f /= n;
    }
    return idx;
}

template <int M>
std::int64_t cube_flat(const std::array<int, M>& idx, int n) {
    std::int64_t f = 0;
    for (int i = 0; i < M; ++i) f = f * n + idx[i];
    return f;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scaled projective data w(abar, pbar) = v_n^{k+1} u(abar, v), p = vbar/v_n.
// ---------------------------------------------------------------------------

template <int N>
struct ProjectiveData {
    static constexpr int M = N - 1;
    int k = 0;
    double a_max = 2.0;
    int na = 65;
    double p_max = 4.0;
    int np = 256;
    std::vector<double> w;  // [a multi][p multi], row-major

    double da() const { return na > 1 ? 2.0 * a_max / (na - 1) : 0.0; }
    double dp() const { return 2.0 * p_max / np; }
    std::int64_t a_count() const { return detail::cube_count<M>(na); }
    std::int64_t p_count() const { return detail::cube_count<M>(np); }

    Vec<M> abar(std::int64_t af) const {
        const auto idx = detail::cube_unflat<M>(af, na);
        Vec<M> a;
        for (int i = 0; i < M; ++i) a[i] = -a_max + idx[i] * da();
        return a;
    }
    Vec<M> pbar(std::int64_t pf) const {
        const auto idx = detail::cube_unflat<M>(pf, np);
        Vec<M> p;
        for (int i = 0; i < M; ++i) p[i] = -p_max + idx[i] * dp();
        return p;
    }
    double& at(std::int64_t af, std::int64_t pf) { return w[af * p_count() + pf]; }
    double at(std::int64_t af, std::int64_t pf) const { return w[af * p_count() + pf]; }

    double sup_abs() const {
        double m = 0;
        for (double v : w) m = std::max(m, std::abs(v));
        return m;
    }
};

/// Source of w rows for off-grid detector positions: used to sample the
/// factored spectrum H. Field-backed sources are valid for every abar; data
/// sources declare a validity radius beyond which sampling throws.
///
/// axis_profile, when available, is phi(x_n) = integral of the density over
/// the slice at height x_n. It gives the xi = 0 column of H exactly as
///   H(sigma, 0) = int_0^inf lambda^{n-k-3} e^{i lambda sigma} phi(1/lambda) dlambda,
/// whose integrand is supported in lambda = 1/x_n in [1/xn_hi, 1/xn_lo].
/// Without it the column is sampled by continuity at a tiny xi, which needs
/// w rows at very distant abar.
template <int M>
struct WRowSource {
    std::function<double(const Vec<M>&, const Vec<M>&)> w;
    // Conservative p window containing the support of w(abar, .).
    std::function<void(const Vec<M>&, Vec<M>&, Vec<M>&)> p_window;
    double abar_valid_radius = std::numeric_limits<double>::infinity();
    std::function<double(double)> axis_profile;  // optional
    double xn_lo = 0, xn_hi = 0;                 // support slab for axis_profile
};

/// w computed from a field supported in {x_n > 0}:
/// w(abar, p) = v_n^{k+1} R^k f((abar,0), v) = int f(abar + t p, t) t^k dt.
template <int N>
struct PlanarBeamEvaluator {
    static constexpr int M = N - 1;
    ScalarField<N> field;
    int k = 0;
    SupportBox box;

    PlanarBeamEvaluator(ScalarField<N> f, int order)
        : field(std::move(f)), k(order), box(support_box(field)) {}

    double w(const Vec<M>& abar, const Vec<M>& pbar) const {
        Vec<N> dir, a{};
        for (int i = 0; i < M; ++i) {
            dir[i] = pbar[i];
            a[i] = abar[i];
        }
        dir[N - 1] = 1.0;
        const double vn = 1.0 / norm(dir);
        const Vec<N> v = vn * dir;
        return std::pow(vn, k + 1) * divergent_beam(field, a, v, k);
    }

    void p_window(const Vec<M>& abar, Vec<M>& lo, Vec<M>& hi) const {
        for (int i = 0; i < M; ++i) {
            lo[i] = std::numeric_limits<double>::infinity();
            hi[i] = -lo[i];
        }
        for (const auto& t : field.terms) {
            const double xn_lo = t.center[N - 1] - t.radius;
            const double xn_hi = t.center[N - 1] + t.radius;
            for (int i = 0; i < M; ++i) {
                for (double c : {t.center[i] - t.radius - abar[i], t.center[i] + t.radius - abar[i]}) {
                    for (double xn : {xn_lo, xn_hi}) {
                        lo[i] = std::min(lo[i], c / xn);
                        hi[i] = std::max(hi[i], c / xn);
                    }
                }
            }
        }
    }

    /// Integral of the field over the slice {x_n = const}.
    double slice_integral(double xn) const {
        const QuadRule& gl = gauss_legendre_cached(64);
        double acc = 0;
        for (const auto& t : field.terms) {
            const double d = xn - t.center[N - 1];
            const double rho2 = t.radius * t.radius - d * d;
            if (rho2 <= 0) continue;
            const double rho = std::sqrt(rho2);
            if constexpr (N == 2) {
                for (int q = 0; q < 64; ++q) {
                    const double y = rho * gl.nodes[q];
                    const double r2 = (y * y + d * d) / (t.radius * t.radius);
                    acc += t.amplitude * rho * gl.weights[q] * std::exp(1.0 - 1.0 / (1.0 - r2));
                }
            } else {
                // Radial in the slice: 2 pi int_0^rho s B(sqrt(s^2+d^2)/r) ds.
                for (int q = 0; q < 64; ++q) {
                    const double s = 0.5 * rho * (gl.nodes[q] + 1.0);
                    const double r2 = (s * s + d * d) / (t.radius * t.radius);
                    acc += t.amplitude * std::numbers::pi * rho * s * gl.weights[q] *
                           std::exp(1.0 - 1.0 / (1.0 - r2));
                }
            }
        }
        return acc;
    }

    WRowSource<M> row_source() const {
        WRowSource<M> src;
        src.w = [self = *this](const Vec<M>& a, const Vec<M>& p) { return self.w(a, p); };
        src.p_window = [self = *this](const Vec<M>& a, Vec<M>& lo, Vec<M>& hi) {
            self.p_window(a, lo, hi);
        };
        src.axis_profile = [self = *this](double xn) { return self.slice_integral(xn); };
        src.xn_lo = box.xn_min;
        src.xn_hi = box.xn_max;
        return src;
    }
};

template <int N>
ProjectiveData<N> projective_data(const PlanarBeamEvaluator<N>& ev, double a_max, int na,
                                  double p_max, int np, int threads = 0) {
    ProjectiveData<N> pd;
    pd.k = ev.k;
    pd.a_max = a_max;
    pd.na = na;
    pd.p_max = p_max;
    pd.np = np;
    pd.w.assign(static_cast<std::size_t>(pd.a_count() * pd.p_count()), 0.0);
    const std::int64_t pc = pd.p_count();
    parallel_for(pd.a_count(), [&](std::int64_t af) {
        const Vec<ProjectiveData<N>::M> a = pd.abar(af);
        for (std::int64_t pf = 0; pf < pc; ++pf) pd.at(af, pf) = ev.w(a, pd.pbar(pf));
    }, threads);
    return pd;
}

/// Ratio of the largest |w| on the outermost p-grid ring to the global max;
/// the compact-support invariant requires it to be negligible.
template <int N>
double support_leak_ratio(const ProjectiveData<N>& pd) {
    constexpr int M = ProjectiveData<N>::M;
    const double maxw = pd.sup_abs();
    if (maxw == 0.0) return 0.0;
    double ring = 0;
    for (std::int64_t pf = 0; pf < pd.p_count(); ++pf) {
        const auto idx = detail::cube_unflat<M>(pf, pd.np);
        bool boundary = false;
        for (int i = 0; i < M; ++i)
            if (idx[i] == 0 || idx[i] == pd.np - 1) boundary = true;
        if (!boundary) continue;
        for (std::int64_t af = 0; af < pd.a_count(); ++af)
            ring = std::max(ring, std::abs(pd.at(af, pf)));
    }
    return ring / maxw;
}

// ---------------------------------------------------------------------------
// Fourier transform in pbar: W(abar, xi) = dp^M sum_j w(abar,p_j) e^{-i p_j.xi}.
// ---------------------------------------------------------------------------

template <int N>
struct SpectralW {
    static constexpr int M = N - 1;
    int k = 0;
    double a_max = 0;
    int na = 0;
    double p_max = 0;
    int np = 0;
    std::vector<std::complex<double>> W;  // [a multi][xi multi], xi ascending

    double da() const { return na > 1 ? 2.0 * a_max / (na - 1) : 0.0; }
    double dxi() const { return std::numbers::pi / p_max; }
    std::int64_t a_count() const { return detail::cube_count<M>(na); }
    std::int64_t xi_count() const { return detail::cube_count<M>(np); }
    Vec<M> abar(std::int64_t af) const {
        const auto idx = detail::cube_unflat<M>(af, na);
        Vec<M> a;
        for (int i = 0; i < M; ++i) a[i] = -a_max + idx[i] * da();
        return a;
    }
    Vec<M> xi(std::int64_t xf) const {
        const auto idx = detail::cube_unflat<M>(xf, np);
        Vec<M> x;
        for (int i = 0; i < M; ++i) x[i] = (idx[i] - np / 2) * dxi();
        return x;
    }
    std::complex<double> at(std::int64_t af, std::int64_t xf) const {
        return W[af * xi_count() + xf];
    }
    double sup_abs() const {
        double m = 0;
        for (const auto& v : W) m = std::max(m, std::abs(v));
        return m;
    }
};

namespace detail {

// In-place FFT along every axis of an M-dim cube with side n.
template <int M>
void fft_cube(std::vector<std::complex<double>>& data, int n, bool inverse) {
    const std::int64_t count = cube_count<M>(n);
    if (static_cast<std::int64_t>(data.size()) != count)
        throw std::invalid_argument("fft_cube: size mismatch");
    std::vector<std::complex<double>> line(n);
    for (int axis = 0; axis < M; ++axis) {
        std::int64_t stride = 1;
        for (int i = axis + 1; i < M; ++i) stride *= n;
        const std::int64_t outer = count / n;
        for (std::int64_t o = 0; o < outer; ++o) {
            // Decompose o into (before, after) around the axis.
            const std::int64_t after = o % stride;
            const std::int64_t before = o / stride;
            const std::int64_t base = before * stride * n + after;
            for (int j = 0; j < n; ++j) line[j] = data[base + j * stride];
            fft(line, inverse);
            for (int j = 0; j < n; ++j) data[base + j * stride] = line[j];
        }
    }
}

}  // namespace detail

/// Riemann-sum continuous Fourier transform of each w row, via FFT with the
/// phase correction for the grid offset. Convention: no 2 pi in the forward.
template <int N>
SpectralW<N> fourier_w(const ProjectiveData<N>& pd) {
    constexpr int M = ProjectiveData<N>::M;
    SpectralW<N> sw;
    sw.k = pd.k;
    sw.a_max = pd.a_max;
    sw.na = pd.na;
    sw.p_max = pd.p_max;
    sw.np = pd.np;
    const std::int64_t pc = pd.p_count();
    sw.W.assign(static_cast<std::size_t>(pd.a_count() * pc), {0, 0});
    const double dpM = std::pow(pd.dp(), M);
    std::vector<std::complex<double>> row(pc);
    for (std::int64_t af = 0; af < pd.a_count(); ++af) {
        for (std::int64_t pf = 0; pf < pc; ++pf) row[pf] = pd.at(af, pf);
        detail::fft_cube<M>(row, pd.np, false);
        // Reorder bins to ascending xi and apply e^{-i p_0 xi} with p_0 = -p_max
        // componentwise: at xi index m the DFT bin is (m - np/2) mod np and the
        // phase is e^{+i p_max xi_m} per axis.
        for (std::int64_t xf = 0; xf < pc; ++xf) {
            const auto idx = detail::cube_unflat<M>(xf, pd.np);
            std::array<int, M> bin{};
            double phase = 0;
            for (int i = 0; i < M; ++i) {
                const int m = idx[i] - pd.np / 2;
                bin[i] = (m % pd.np + pd.np) % pd.np;
                phase += pd.p_max * m * sw.dxi();
            }
            sw.W[af * pc + xf] = dpM * std::polar(1.0, phase) * row[detail::cube_flat<M>(bin, pd.np)];
        }
    }
    return sw;
}

// ---------------------------------------------------------------------------
// Factorization condition: W(abar, xi) constant on {abar . xi = const}.
// ---------------------------------------------------------------------------

/// For n = 2 every b orthogonal to a nonzero scalar xi is zero, so the
/// condition is vacuous and reported as such. For n = 3 the residual compares
/// W at lattice pairs with (a1 - a2).xi = 0 exactly, over axis-aligned and
/// diagonal xi directions.
template <int N>
void check_factorization(const SpectralW<N>& sw, ConsistencyReport& report, double tol = 1e-4) {
    constexpr int M = SpectralW<N>::M;
    if constexpr (M == 1) {
        report.add("factorization", 0.0, tol, "vacuous (n=2)");
        return;
    } else {
        const double norm = std::max(1.0, sw.sup_abs());
        double res = 0;
        const std::int64_t xc = sw.xi_count();
        const auto W_at = [&](int i0, int i1, std::int64_t xf) {
            return sw.W[(static_cast<std::int64_t>(i0) * sw.na + i1) * xc + xf];
        };
        for (std::int64_t xf = 0; xf < xc; ++xf) {
            const auto idx = detail::cube_unflat<M>(xf, sw.np);
            const int m0 = idx[0] - sw.np / 2, m1 = idx[1] - sw.np / 2;
            if (m0 == 0 && m1 == 0) continue;
            if (m1 == 0) {
                // xi along axis 0: rows with equal a0.
                for (int i0 = 0; i0 < sw.na; ++i0)
                    for (int i1 = 1; i1 < sw.na; ++i1)
                        res = std::max(res, std::abs(W_at(i0, i1, xf) - W_at(i0, 0, xf)));
            } else if (m0 == 0) {
                for (int i1 = 0; i1 < sw.na; ++i1)
                    for (int i0 = 1; i0 < sw.na; ++i0)
                        res = std::max(res, std::abs(W_at(i0, i1, xf) - W_at(0, i1, xf)));
            } else if (m0 == m1 || m0 == -m1) {
                // Diagonal xi: lattice offset (1, -sign) keeps a.xi fixed.
                const int s = m0 == m1 ? 1 : -1;
                for (int i0 = 0; i0 + 1 < sw.na; ++i0) {
                    for (int i1 = 0; i1 < sw.na; ++i1) {
                        const int j1 = i1 - s;
                        if (j1 < 0 || j1 >= sw.na) continue;
                        res = std::max(res, std::abs(W_at(i0 + 1, j1, xf) - W_at(i0, i1, xf)));
                    }
                }
            }
        }
        report.add("factorization", res / norm, tol);
    }
}

// ---------------------------------------------------------------------------
// H(sigma, xi) = W(sigma xi/|xi|^2, xi) and its inverse transform h(t, pbar).
// ---------------------------------------------------------------------------

template <int N>
struct SpectralH {
    static constexpr int M = N - 1;
    int k = 0;
    double sigma_max = 64.0;
    int nsig = 512;
    double p_max = 4.0;
    int np = 256;
    std::vector<std::complex<double>> H;  // [sigma][xi multi]
    std::vector<double> h;                // [t][p multi]
    double h_imag_max = 0;                // conjugate-symmetry residue

    double dsig() const { return 2.0 * sigma_max / nsig; }
    double dxi() const { return std::numbers::pi / p_max; }
    double dt() const { return std::numbers::pi / sigma_max; }
    double dp() const { return 2.0 * p_max / np; }
    double sigma(int i) const { return (i - nsig / 2) * dsig(); }
    double t(int l) const { return (l - nsig / 2) * dt(); }
    std::int64_t xi_count() const { return detail::cube_count<M>(np); }
    Vec<M> xi(std::int64_t xf) const {
        const auto idx = detail::cube_unflat<M>(xf, np);
        Vec<M> x;
        for (int i = 0; i < M; ++i) x[i] = (idx[i] - np / 2) * dxi();
        return x;
    }
    Vec<M> pbar(std::int64_t pf) const {
        const auto idx = detail::cube_unflat<M>(pf, np);
        Vec<M> p;
        for (int i = 0; i < M; ++i) p[i] = (idx[i] - np / 2) * dp();
        return p;
    }
    double h_at(int l, std::int64_t pf) const { return h[l * xi_count() + pf]; }

    double h_sup_abs() const {
        double m = 0;
        for (double v : h) m = std::max(m, std::abs(v));
        return m;
    }
};

namespace detail {

// sum_i e^{+i x_l y_i} data_i on centered grids x_l = (l-L/2) dx,
// y_i = (i-L/2) dy with dx dy = 2 pi / L, along every axis of [nsig, np^M].
template <int M>
void centered_inverse_transform(std::vector<std::complex<double>>& data, int nsig, int np) {
    const std::int64_t xc = cube_count<M>(np);
    // sigma axis.
    {
        std::vector<std::complex<double>> line(nsig);
        const double mid_sign = (nsig / 2) % 2 == 0 ? 1.0 : -1.0;
        for (std::int64_t c = 0; c < xc; ++c) {
            for (int i = 0; i < nsig; ++i)
                line[i] = (i % 2 == 0 ? 1.0 : -1.0) * data[static_cast<std::int64_t>(i) * xc + c];
            fft(line, true);
            for (int l = 0; l < nsig; ++l)
                data[static_cast<std::int64_t>(l) * xc + c] =
                    mid_sign * double(nsig) * (l % 2 == 0 ? 1.0 : -1.0) * line[l];
        }
    }
    // p axes.
    std::vector<std::complex<double>> line(np);
    const double mid_sign = (np / 2) % 2 == 0 ? 1.0 : -1.0;
    for (int axis = 0; axis < M; ++axis) {
        std::int64_t stride = 1;
        for (int i = axis + 1; i < M; ++i) stride *= np;
        for (int s = 0; s < nsig; ++s) {
            const std::int64_t slab = static_cast<std::int64_t>(s) * xc;
            const std::int64_t outer = xc / np;
            for (std::int64_t o = 0; o < outer; ++o) {
                const std::int64_t after = o % stride;
                const std::int64_t before = o / stride;
                const std::int64_t base = slab + before * stride * np + after;
                for (int j = 0; j < np; ++j)
                    line[j] = (j % 2 == 0 ? 1.0 : -1.0) * data[base + j * stride];
                fft(line, true);
                for (int j = 0; j < np; ++j)
                    data[base + j * stride] =
                        mid_sign * double(np) * (j % 2 == 0 ? 1.0 : -1.0) * line[j];
            }
        }
    }
}

}  // namespace detail

/// Samples H(sigma, xi) = W(a_sigma, xi) with a_sigma = sigma xi/|xi|^2,
/// recomputing each w row from the source on a support-centered p window
/// (same spacing as the p grid), then inverts to h on the dual (t, p) grid
/// with Riemann normalization (2 pi)^{-n} dsig dxi^M.
///
/// The xi = 0 column is singular for the a_sigma map; it is sampled by
/// continuity at xi = (dxi/128) e_1, which the infinite detector line of a
/// field-backed source makes evaluable. Conjugate symmetry H(-s,-xi) =
/// conj H(s, xi) halves the sampling and keeps h real to roundoff.
template <int N>
SpectralH<N> build_h(const WRowSource<N - 1>& src, double p_max, int np, double sigma_max,
                     int nsig, int k = 0, int threads = 0) {
    constexpr int M = N - 1;
    if (np % 2 != 0 || nsig % 2 != 0) throw std::invalid_argument("build_h: even grid sizes required");
    SpectralH<N> sh;
    sh.k = k;
    sh.sigma_max = sigma_max;
    sh.nsig = nsig;
    sh.p_max = p_max;
    sh.np = np;
    const std::int64_t xc = sh.xi_count();
    sh.H.assign(static_cast<std::size_t>(nsig) * xc, {0, 0});
    const double dp = sh.dp();
    const double dpM = std::pow(dp, M);

    // One W sample: Riemann sum of w(abar, .) e^{-i p.xi} over the p lattice
    // restricted to the support window of the row.
    const auto sample_W = [&](const Vec<M>& abar, const Vec<M>& xi) {
        if (norm(abar) > src.abar_valid_radius)
            throw std::domain_error("build_h: abar outside the source validity range");
        Vec<M> lo, hi;
        src.p_window(abar, lo, hi);
        std::array<int, M> jlo{}, jn{};
        std::int64_t cells = 1;
        for (int i = 0; i < M; ++i) {
            if (!(lo[i] <= hi[i])) return std::complex<double>(0, 0);  // empty support
            jlo[i] = static_cast<int>(std::floor((lo[i] + p_max) / dp)) - 2;
            const int jhi = static_cast<int>(std::ceil((hi[i] + p_max) / dp)) + 2;
            jn[i] = jhi - jlo[i] + 1;
            cells *= jn[i];
        }
        std::complex<double> acc(0, 0);
        for (std::int64_t c = 0; c < cells; ++c) {
            std::int64_t rem = c;
            Vec<M> p;
            for (int i = M - 1; i >= 0; --i) {
                const int j = jlo[i] + static_cast<int>(rem % jn[i]);
                rem /= jn[i];
                p[i] = -p_max + j * dp;
            }
            const double wv = src.w(abar, p);
            if (wv != 0.0) acc += wv * std::polar(1.0, -dot(p, xi));
        }
        return dpM * acc;
    };

    // xi = 0 column, precomputed once.
    std::vector<std::complex<double>> zerocol(nsig);
    if (src.axis_profile && src.xn_lo > 0.0) {
        // H(sigma, 0) = int lambda^{n-k-3} e^{i lambda sigma} phi(1/lambda) dlambda
        // on lambda in [1/xn_hi, 1/xn_lo]; one panelization resolves the
        // oscillation at the largest |sigma| and is shared across the column.
        const double lam_lo = 1.0 / src.xn_hi, lam_hi = 1.0 / src.xn_lo;
        const int panels =
            std::max(8, static_cast<int>(std::ceil(sigma_max * (lam_hi - lam_lo) / 4.0)));
        const QuadRule& gl = gauss_legendre_cached(16);
        std::vector<double> lam, lam_w;
        const double hpan = (lam_hi - lam_lo) / panels;
        for (int p = 0; p < panels; ++p) {
            const double mid = lam_lo + (p + 0.5) * hpan;
            for (int q = 0; q < 16; ++q) {
                const double l = mid + 0.5 * hpan * gl.nodes[q];
                double wt = 0.5 * hpan * gl.weights[q] * std::pow(l, double(N) - k - 3.0);
                lam.push_back(l);
                lam_w.push_back(wt * src.axis_profile(1.0 / l));
            }
        }
        for (int i = 0; i < nsig; ++i) {
            std::complex<double> acc(0, 0);
            const double sg = sh.sigma(i);
            for (std::size_t q = 0; q < lam.size(); ++q)
                acc += lam_w[q] * std::polar(1.0, lam[q] * sg);
            zerocol[i] = acc;
        }
    } else {
        // Continuity sampling at a tiny xi along +e_1; needs far-off rows.
        const double xi_eps = sh.dxi() / 128.0;
        for (int i = 0; i < nsig; ++i) {
            Vec<M> xe{};
            xe[0] = xi_eps;
            Vec<M> abar{};
            abar[0] = sh.sigma(i) / xi_eps;
            zerocol[i] = sample_W(abar, xe);
        }
    }

    // Fill the half-spectrum; mirror the conjugate where the partner exists
    // (exact for real w: same abar row, conjugate phase).
    std::vector<std::uint8_t> filled(sh.H.size(), 0);
    parallel_for(static_cast<std::int64_t>(sh.H.size()), [&](std::int64_t f) {
        const int i = static_cast<int>(f / xc);
        const std::int64_t xf = f % xc;
        const auto xidx = detail::cube_unflat<M>(xf, np);
        std::array<int, M> midx{};
        bool mirror_exists = i > 0;
        int lex = 0;
        for (int ax = 0; ax < M; ++ax) {
            const int m = xidx[ax] - np / 2;
            if (lex == 0 && m != 0) lex = m > 0 ? 1 : -1;
            if (xidx[ax] == 0) mirror_exists = false;
            midx[ax] = np - xidx[ax];
        }
        if (lex == 0) {
            sh.H[f] = zerocol[i];
            filled[f] = 1;
            return;
        }
        if (lex < 0 && mirror_exists) return;  // filled by the partner
        const double sg = sh.sigma(i);
        const Vec<M> xi = sh.xi(xf);
        const std::complex<double> val = sample_W((sg / norm2(xi)) * xi, xi);
        sh.H[f] = val;
        filled[f] = 1;
        if (lex > 0 && mirror_exists) {
            const std::int64_t mf =
                static_cast<std::int64_t>(nsig - i) * xc + detail::cube_flat<M>(midx, np);
            sh.H[mf] = std::conj(val);
            filled[mf] = 1;
        }
    }, threads);
    for (std::int64_t f = 0; f < static_cast<std::int64_t>(sh.H.size()); ++f)
        if (!filled[f]) {
            // Edge bins (Nyquist rows) whose mirror partner is off the grid.
            const int i = static_cast<int>(f / xc);
            const Vec<M> xi = sh.xi(f % xc);
            sh.H[f] = sample_W((sh.sigma(i) / norm2(xi)) * xi, xi);
        }

    // h = (2 pi)^{-n} dsig dxi^M sum e^{i(t sigma + p.xi)} H.
    std::vector<std::complex<double>> hbuf = sh.H;
    detail::centered_inverse_transform<M>(hbuf, nsig, np);
    const double scale = sh.dsig() * std::pow(sh.dxi(), M) / std::pow(2.0 * std::numbers::pi, N);
    sh.h.resize(hbuf.size());
    sh.h_imag_max = 0;
    for (std::size_t f = 0; f < hbuf.size(); ++f) {
        sh.h[f] = scale * hbuf[f].real();
        sh.h_imag_max = std::max(sh.h_imag_max, std::abs(scale * hbuf[f].imag()));
    }
    return sh;
}

// ---------------------------------------------------------------------------
// Support cone of h: t in [-M0, -m0], |p| <= -R t.
// ---------------------------------------------------------------------------

struct SupportCone {
    double m0 = 0;
    double M0 = 0;
    double R = 0;
};

/// Fraction of sum |h|^2 outside the cone dilated by one grid cell.
template <int N>
double h_support_residual(const SpectralH<N>& sh, const SupportCone& cone) {
    const std::int64_t xc = sh.xi_count();
    double outside = 0, total = 0;
    for (int l = 0; l < sh.nsig; ++l) {
        const double t = sh.t(l);
        for (std::int64_t pf = 0; pf < xc; ++pf) {
            const double e = sh.h_at(l, pf) * sh.h_at(l, pf);
            total += e;
            const bool t_in = t >= -cone.M0 - sh.dt() && t <= -cone.m0 + sh.dt();
            const bool p_in = norm(sh.pbar(pf)) <= cone.R * std::abs(t) + sh.dp();
            if (!(t_in && p_in)) outside += e;
        }
    }
    return total > 0 ? outside / total : 0.0;
}

template <int N>
void check_h_support(const SpectralH<N>& sh, const SupportCone& cone, ConsistencyReport& report,
                     double tol = 1e-4) {
    report.add("h_support", h_support_residual(sh, cone), tol);
}

/// Smallest cone (by greedy mass trimming) containing the given fraction of
/// the h energy; used when support constants are not supplied.
template <int N>
SupportCone estimate_support_cone(const SpectralH<N>& sh, double mass_fraction = 0.9999) {
    const std::int64_t xc = sh.xi_count();
    std::vector<double> tmass(sh.nsig, 0.0);
    double total = 0;
    for (int l = 0; l < sh.nsig; ++l)
        for (std::int64_t pf = 0; pf < xc; ++pf) {
            const double e = sh.h_at(l, pf) * sh.h_at(l, pf);
            tmass[l] += e;
            total += e;
        }
    SupportCone cone;
    if (total == 0.0) return cone;
    int lo = 0, hi = sh.nsig - 1;
    double kept = total;
    while (lo < hi && kept - std::min(tmass[lo], tmass[hi]) >= mass_fraction * total) {
        if (tmass[lo] <= tmass[hi]) kept -= tmass[lo++];
        else kept -= tmass[hi--];
    }
    cone.M0 = -sh.t(lo);
    cone.m0 = -sh.t(hi);
    // Slope: quantile of |p|/|t| within the band.
    std::vector<std::pair<double, double>> ratio;  // (|p|/|t|, energy)
    double band = 0;
    for (int l = lo; l <= hi; ++l) {
        const double t = sh.t(l);
        if (t == 0.0) continue;
        for (std::int64_t pf = 0; pf < xc; ++pf) {
            const double e = sh.h_at(l, pf) * sh.h_at(l, pf);
            if (e == 0.0) continue;
            ratio.emplace_back(norm(sh.pbar(pf)) / std::abs(t), e);
            band += e;
        }
    }
    std::sort(ratio.begin(), ratio.end());
    double acc = 0;
    for (const auto& [r, e] : ratio) {
        acc += e;
        cone.R = r;
        if (acc >= mass_fraction * band) break;
    }
    return cone;
}

// ---------------------------------------------------------------------------
// Reconstruction f(xbar, x_n) = x_n^{-k-2} h(-1/x_n, xbar/x_n).
// ---------------------------------------------------------------------------

namespace detail {

inline double catmull_rom(double vm1, double v0, double v1, double v2, double u) {
    return v0 + 0.5 * u * (v1 - vm1 + u * (2 * vm1 - 5 * v0 + 4 * v1 - v2 +
                                            u * (3 * (v0 - v1) + v2 - vm1)));
}

// Separable cubic interpolation over the (t, p...) cube; zero outside.
template <int N>
double h_interpolate(const SpectralH<N>& sh, double t, const Vec<N - 1>& p) {
    constexpr int M = N - 1;
    const double ft = t / sh.dt() + sh.nsig / 2;
    const int lt = static_cast<int>(std::floor(ft));
    if (lt < 1 || lt + 2 >= sh.nsig) return 0.0;
    std::array<int, M> lp{};
    std::array<double, M> up{};
    for (int i = 0; i < M; ++i) {
        const double fp = (p[i] + sh.np / 2 * sh.dp()) / sh.dp();
        const int j = static_cast<int>(std::floor(fp));
        if (j < 1 || j + 2 >= sh.np) return 0.0;
        lp[i] = j;
        up[i] = fp - j;
    }
    const double ut = ft - lt;
    // Gather the 4^{M+1} stencil and reduce axis by axis (p axes then t).
    const std::int64_t xc = cube_count<M>(sh.np);
    double tvals[4];
    for (int a = 0; a < 4; ++a) {
        const int l = lt - 1 + a;
        // Reduce the p axes recursively.
        std::array<int, M> idx{};
        const std::function<double(int)> reduce = [&](int axis) -> double {
            if (axis == M) {
                std::array<int, M> g{};
                for (int i = 0; i < M; ++i) g[i] = idx[i];
                return sh.h_at(l, cube_flat<M>(g, sh.np));
            }
            double v[4];
            for (int b = 0; b < 4; ++b) {
                idx[axis] = lp[axis] - 1 + b;
                v[b] = reduce(axis + 1);
            }
            return catmull_rom(v[0], v[1], v[2], v[3], up[axis]);
        };
        tvals[a] = reduce(0);
    }
    return catmull_rom(tvals[0], tvals[1], tvals[2], tvals[3], ut);
}

}  // namespace detail

template <int N>
GridField<N> reconstruct_from_h(const SpectralH<N>& sh, int k, const GridSpec<N>& out) {
    GridField<N> f(out);
    for (std::int64_t fi = 0; fi < out.size(); ++fi) {
        const Vec<N> x = out.node(out.unflat(fi));
        const double xn = x[N - 1];
        if (xn <= 0.0) {
            f.values[fi] = 0.0;
            continue;
        }
        Vec<N - 1> p;
        for (int i = 0; i < N - 1; ++i) p[i] = x[i] / xn;
        f.values[fi] = std::pow(xn, -k - 2.0) * detail::h_interpolate(sh, -1.0 / xn, p);
    }
    return f;
}

// ---------------------------------------------------------------------------
// Moment conditions: J_m(abar, xi) = int (p.xi)^m w(abar, p) dp is a
// polynomial of degree <= m in abar.xi (per direction), homogeneous of
// degree m in xi.
// ---------------------------------------------------------------------------

template <int N>
std::vector<double> moments(const ProjectiveData<N>& pd, const Vec<N - 1>& xi_dir, int m) {
    constexpr int M = N - 1;
    if (m > 8) throw std::invalid_argument("moments: order must be <= 8");
    std::vector<double> J(pd.a_count(), 0.0);
    const double dpM = std::pow(pd.dp(), M);
    for (std::int64_t af = 0; af < pd.a_count(); ++af) {
        double acc = 0;
        for (std::int64_t pf = 0; pf < pd.p_count(); ++pf) {
            const double w = pd.at(af, pf);
            if (w == 0.0) continue;
            acc += std::pow(dot(pd.pbar(pf), xi_dir), m) * w;
        }
        J[af] = acc * dpM;
    }
    return J;
}

namespace detail {

/// Least-squares polynomial fit of degree deg; returns rms(residual)/rms(y),
/// or 0 when y is identically zero.
inline double poly_fit_residual(const std::vector<double>& x, const std::vector<double>& y,
                                int deg) {
    const int n = static_cast<int>(x.size());
    const int m = deg + 1;
    double yrms = 0;
    for (double v : y) yrms += v * v;
    if (yrms == 0.0) return 0.0;
    // Scale x for conditioning.
    double xs = 0;
    for (double v : x) xs = std::max(xs, std::abs(v));
    if (xs == 0.0) xs = 1.0;
    // Normal equations A c = b with A = V^T V.
    std::vector<double> A(m * m, 0.0), b(m, 0.0), pw(m);
    for (int i = 0; i < n; ++i) {
        pw[0] = 1.0;
        for (int j = 1; j < m; ++j) pw[j] = pw[j - 1] * (x[i] / xs);
        for (int r = 0; r < m; ++r) {
            b[r] += pw[r] * y[i];
            for (int c = 0; c < m; ++c) A[r * m + c] += pw[r] * pw[c];
        }
    }
    // Gaussian elimination with partial pivoting.
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int r = col + 1; r < m; ++r)
            if (std::abs(A[r * m + col]) > std::abs(A[piv * m + col])) piv = r;
        if (std::abs(A[piv * m + col]) < 1e-300)
            throw std::runtime_error("poly_fit_residual: rank-deficient fit");
        if (piv != col) {
            for (int c = 0; c < m; ++c) std::swap(A[piv * m + c], A[col * m + c]);
            std::swap(b[piv], b[col]);
        }
        for (int r = col + 1; r < m; ++r) {
            const double f = A[r * m + col] / A[col * m + col];
            for (int c = col; c < m; ++c) A[r * m + c] -= f * A[col * m + c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> coef(m);
    for (int r = m - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < m; ++c) s -= A[r * m + c] * coef[c];
        coef[r] = s / A[r * m + r];
    }
    double rrms = 0;
    for (int i = 0; i < n; ++i) {
        double fit = 0, p = 1;
        for (int j = 0; j < m; ++j) {
            fit += coef[j] * p;
            p *= x[i] / xs;
        }
        rrms += (y[i] - fit) * (y[i] - fit);
    }
    return std::sqrt(rrms / yrms);
}

}  // namespace detail

/// Per-direction polynomial fits of J_m in sigma = abar.xi for m <= m_max,
/// the J0 invariance across abar, the exact lambda-scaling sanity identity,
/// and (n >= 3) invariance of J_m across abar with equal abar.xi.
template <int N>
void check_moment_condition(const ProjectiveData<N>& pd, int m_max,
                            const std::vector<Vec<N - 1>>& dirs, ConsistencyReport& report,
                            double tol = 1e-4) {
    constexpr int M = N - 1;
    if (m_max > 8) throw std::invalid_argument("check_moment_condition: m_max must be <= 8");

    // J0 is direction independent; its spread across abar is a dedicated entry.
    {
        const auto J0 = moments(pd, axis_unit<M>(0), 0);
        double mn = J0[0], mx = J0[0], scale = 0;
        for (double v : J0) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
            scale = std::max(scale, std::abs(v));
        }
        const double spread = scale > 0 ? (mx - mn) / scale : 0.0;
        report.add("moment_j0_spread", spread, 1e-6);
    }

    double worst_scaling = 0;
    for (std::size_t d = 0; d < dirs.size(); ++d) {
        const Vec<M>& dir = dirs[d];
        // sigma values over the abar lattice.
        std::vector<double> sigma(pd.a_count());
        for (std::int64_t af = 0; af < pd.a_count(); ++af) sigma[af] = dot(pd.abar(af), dir);
        // Distinct sigma count gate.
        {
            std::vector<double> s = sigma;
            std::sort(s.begin(), s.end());
            int distinct = 1;
            for (std::size_t i = 1; i < s.size(); ++i)
                if (s[i] - s[i - 1] > 1e-12) ++distinct;
            if (distinct < 2 * m_max + 2)
                throw std::invalid_argument("check_moment_condition: too few distinct abar.xi values");
        }
        for (int m = 0; m <= m_max; ++m) {
            const auto J = moments(pd, dir, m);
            const double res = detail::poly_fit_residual(sigma, J, m);
            report.add("moment_deg" + std::to_string(m) + "_dir" + std::to_string(d), res, tol);
            // Homogeneity in xi: J_m(abar, 2 xi) = 2^m J_m(abar, xi) exactly.
            const auto J2 = moments(pd, 2.0 * dir, m);
            double jscale = 0;
            for (double v : J) jscale = std::max(jscale, std::abs(v));
            for (std::size_t i = 0; i < J.size(); ++i)
                worst_scaling = std::max(worst_scaling,
                                         std::abs(J2[i] - std::pow(2.0, m) * J[i]) /
                                             std::max(1.0, jscale * std::pow(2.0, m)));
        }
        if constexpr (M >= 2) {
            // Equal-sigma invariance for axis directions: J_m must agree on
            // lattice rows orthogonal to xi.
            if (std::abs(dir[0] - 1.0) < 1e-14 && std::abs(dir[1]) < 1e-14) {
                double res = 0, jscale = 0;
                for (int m = 1; m <= m_max; ++m) {
                    const auto J = moments(pd, dir, m);
                    for (double v : J) jscale = std::max(jscale, std::abs(v));
                    for (int i0 = 0; i0 < pd.na; ++i0)
                        for (int i1 = 1; i1 < pd.na; ++i1)
                            res = std::max(res, std::abs(J[i0 * pd.na + i1] - J[i0 * pd.na]));
                }
                report.add("moment_equal_sigma", res / std::max(1.0, jscale), tol);
            }
        }
    }
    report.add("moment_scaling_identity", worst_scaling, 1e-12);
}

}  // namespace conetomo
