#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "conetomo/fft.hpp"
#include "conetomo/geometry.hpp"
#include "conetomo/vec.hpp"

namespace conetomo {

// ---------------------------------------------------------------------------
// Circle (S^1) spectral utilities on the 2L uniform angle grid.
// ---------------------------------------------------------------------------

/// Fourier coefficients of samples at theta_j = pi*j/L; coeff[m] multiplies
/// e^{i m theta} with m = idx for idx < M/2 and idx - M otherwise.
inline std::vector<std::complex<double>> circle_analyze(const std::vector<double>& samples) {
    std::vector<std::complex<double>> c(samples.begin(), samples.end());
    fft(c, false);
    const double scale = 1.0 / static_cast<double>(samples.size());
    for (auto& x : c) x *= scale;
    return c;
}

inline int circle_mode(int idx, int M) { return idx < M - idx ? idx : idx - M; }

/// Second derivative in the angle by spectral differentiation.
inline std::vector<double> circle_laplacian(const std::vector<double>& samples) {
    const int M = static_cast<int>(samples.size());
    std::vector<std::complex<double>> c(samples.begin(), samples.end());
    fft(c, false);
    for (int idx = 0; idx < M; ++idx) {
        const double m = circle_mode(idx, M);
        c[idx] *= -m * m;
    }
    fft(c, true);
    std::vector<double> out(M);
    for (int i = 0; i < M; ++i) out[i] = c[i].real();
    return out;
}

/// Trigonometric interpolation; exact at the sample angles.
inline double circle_interpolate(const std::vector<double>& samples, double theta) {
    const int M = static_cast<int>(samples.size());
    const auto c = circle_analyze(samples);
    std::complex<double> acc = c[0];
    for (int m = 1; m < M / 2; ++m) {
        const std::complex<double> e(std::cos(m * theta), std::sin(m * theta));
        acc += c[m] * e + c[M - m] * std::conj(e);
    }
    if (M % 2 == 0) acc += c[M / 2] * std::cos(0.5 * M * theta);
    return acc.real();
}

/// Fraction of spectral energy at modes |m| >= m_cut; smoothness surrogate.
inline double circle_tail_fraction(const std::vector<double>& samples, int m_cut) {
    const int M = static_cast<int>(samples.size());
    const auto c = circle_analyze(samples);
    double tail = 0, total = 0;
    for (int idx = 0; idx < M; ++idx) {
        const double e = std::norm(c[idx]);
        total += e;
        if (std::abs(circle_mode(idx, M)) >= m_cut) tail += e;
    }
    return total > 0 ? tail / total : 0.0;
}

// ---------------------------------------------------------------------------
// Sphere (S^2) harmonic transform on the Gauss-Legendre x uniform grid.
// ---------------------------------------------------------------------------

/// Normalized associated Legendre values Pbar_l^m(mu) for 0 <= m <= l < lmax,
/// with int_{-1}^{1} Pbar^2 dmu = 1/(2 pi). Packed index l*(l+1)/2 + m.
inline void legendre_normalized(int lmax, double mu, std::vector<double>& out) {
    const int count = lmax * (lmax + 1) / 2;
    out.assign(count, 0.0);
    auto at = [&](int l, int m) -> double& { return out[l * (l + 1) / 2 + m]; };
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - mu * mu));
    at(0, 0) = std::sqrt(1.0 / (4.0 * std::numbers::pi));
    for (int m = 1; m < lmax; ++m)
        at(m, m) = -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * sin_t * at(m - 1, m - 1);
    for (int m = 0; m + 1 < lmax; ++m)
        at(m + 1, m) = std::sqrt(2.0 * m + 3.0) * mu * at(m, m);
    for (int m = 0; m < lmax; ++m) {
        for (int l = m + 2; l < lmax; ++l) {
            const double a = std::sqrt((4.0 * l * l - 1.0) / (double(l) * l - double(m) * m));
            const double b =
                std::sqrt((double(l - 1) * (l - 1) - double(m) * m) / (4.0 * double(l - 1) * (l - 1) - 1.0));
            at(l, m) = a * (mu * at(l - 1, m) - b * at(l - 2, m));
        }
    }
}

/// Spherical-harmonic coefficients a_{lm}, l < L, |m| <= l, on the grid of
/// sphere_grid<3>(L). Flat index l*l + (m + l). Analysis is quadrature-exact
/// for band-limited data up to degree L-1.
struct SphereSpectrum {
    int L = 0;
    std::vector<std::complex<double>> alm;

    std::complex<double>& at(int l, int m) { return alm[l * l + m + l]; }
    std::complex<double> at(int l, int m) const { return alm[l * l + m + l]; }
};

class SphereTransform {
  public:
    explicit SphereTransform(const SphereGrid<3>& grid) : L_(grid.L), grid_(grid) {
        ptab_.resize(L_);
        for (int i = 0; i < L_; ++i) legendre_normalized(L_, grid.polar_mu[i], ptab_[i]);
    }

    SphereSpectrum analyze(const std::vector<double>& values) const {
        check_size(values.size());
        SphereSpectrum sp;
        sp.L = L_;
        sp.alm.assign(L_ * L_, {0.0, 0.0});
        const int M = 2 * L_;
        std::vector<std::complex<double>> ring(M);
        const double az_w = std::numbers::pi / L_;
        for (int i = 0; i < L_; ++i) {
            for (int j = 0; j < M; ++j) ring[j] = values[i * M + j];
            fft(ring, false);  // ring[m] = sum_j g e^{-im phi_j}
            const double wq = grid_.polar_weight[i] * az_w;
            for (int l = 0; l < L_; ++l) {
                for (int m = -l; m <= l; ++m) {
                    const double p = ptab_[i][l * (l + 1) / 2 + std::abs(m)];
                    const int bin = (m + M) % M;
                    sp.at(l, m) += wq * p * ring[bin];
                }
            }
        }
        return sp;
    }

    std::vector<double> synthesize(const SphereSpectrum& sp) const {
        const int M = 2 * L_;
        std::vector<double> out(L_ * M, 0.0);
        std::vector<std::complex<double>> ring(M);
        for (int i = 0; i < L_; ++i) {
            std::fill(ring.begin(), ring.end(), std::complex<double>(0, 0));
            for (int l = 0; l < L_; ++l) {
                for (int m = -l; m <= l; ++m) {
                    const double p = ptab_[i][l * (l + 1) / 2 + std::abs(m)];
                    ring[(m + M) % M] += sp.at(l, m) * p;
                }
            }
            fft(ring, true);  // (1/M) sum_m S_m e^{+im phi_j}
            for (int j = 0; j < M; ++j) out[i * M + j] = (double(M) * ring[j]).real();
        }
        return out;
    }

    /// Laplace-Beltrami on grid samples via eigenvalues -l(l+1).
    std::vector<double> laplacian(const std::vector<double>& values) const {
        SphereSpectrum sp = analyze(values);
        for (int l = 0; l < L_; ++l)
            for (int m = -l; m <= l; ++m) sp.at(l, m) *= -double(l) * (l + 1);
        return synthesize(sp);
    }

    /// Synthesis at an arbitrary unit vector (truncated series).
    double eval(const SphereSpectrum& sp, const Vec<3>& v) const {
        const double mu = v[2];
        const double phi = std::atan2(v[1], v[0]);
        std::vector<double> p;
        legendre_normalized(L_, mu, p);
        std::complex<double> acc(0, 0);
        for (int l = 0; l < L_; ++l) {
            for (int m = -l; m <= l; ++m) {
                const double pl = p[l * (l + 1) / 2 + std::abs(m)];
                acc += sp.at(l, m) * pl *
                       std::complex<double>(std::cos(m * phi), std::sin(m * phi));
            }
        }
        return acc.real();
    }

    double tail_fraction(const std::vector<double>& values, int l_cut) const {
        const SphereSpectrum sp = analyze(values);
        double tail = 0, total = 0;
        for (int l = 0; l < L_; ++l) {
            for (int m = -l; m <= l; ++m) {
                const double e = std::norm(sp.at(l, m));
                total += e;
                if (l >= l_cut) tail += e;
            }
        }
        return total > 0 ? tail / total : 0.0;
    }

  private:
    void check_size(std::size_t n) const {
        if (n != static_cast<std::size_t>(2 * L_ * L_))
            throw std::invalid_argument("SphereTransform: sample count does not match grid");
    }
    int L_;
    SphereGrid<3> grid_;
    std::vector<std::vector<double>> ptab_;
};

/// Trigonometric interpolation on the circle with precomputed coefficients;
/// exact at the sample angles.
class CircleInterpolant {
  public:
    explicit CircleInterpolant(const std::vector<double>& samples)
        : M_(static_cast<int>(samples.size())), coeff_(circle_analyze(samples)) {}

    double eval(double theta) const {
        std::complex<double> acc = coeff_[0];
        for (int m = 1; m < M_ / 2; ++m) {
            const std::complex<double> e(std::cos(m * theta), std::sin(m * theta));
            acc += coeff_[m] * e + coeff_[M_ - m] * std::conj(e);
        }
        if (M_ % 2 == 0) acc += coeff_[M_ / 2] * std::cos(0.5 * M_ * theta);
        return acc.real();
    }

  private:
    int M_;
    std::vector<std::complex<double>> coeff_;
};

/// Interpolation on the sphere grid that reproduces its own nodes exactly:
/// trigonometric in azimuth, barycentric Lagrange through the GL polar nodes.
/// Accuracy off the nodes is limited by the sqrt(1-mu^2) geometry factor near
/// the poles; SphereInterpolant below removes that limitation.
inline double sphere_interpolate(const SphereGrid<3>& grid, const std::vector<double>& values,
                                 const Vec<3>& v) {
    const int L = grid.L, M = 2 * L;
    const double mu = std::clamp(v[2], -1.0, 1.0);
    const double phi = std::atan2(v[1], v[0]);
    // Ring values at the query azimuth.
    std::vector<double> ringval(L), ring(M);
    for (int i = 0; i < L; ++i) {
        for (int j = 0; j < M; ++j) ring[j] = values[i * M + j];
        ringval[i] = circle_interpolate(ring, phi);
    }
    // Barycentric weights for the GL nodes (computed on demand; L is small).
    std::vector<double> w(L, 1.0);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j)
            if (j != i) w[i] /= (grid.polar_mu[i] - grid.polar_mu[j]);
    double num = 0, den = 0;
    for (int i = 0; i < L; ++i) {
        const double d = mu - grid.polar_mu[i];
        if (d == 0.0) return ringval[i];
        const double t = w[i] / d;
        num += t * ringval[i];
        den += t;
    }
    return num / den;
}

/// Node-exact, spectrally accurate interpolant of sphere samples: truncated
/// harmonic synthesis plus the Lagrange-interpolated nodal residual. The
/// residual vanishes at every node, so nodes reproduce exactly; off the nodes
/// the synthesis carries the accuracy for smooth data.
class SphereInterpolant {
  public:
    SphereInterpolant(const SphereGrid<3>& grid, const std::vector<double>& values)
        : grid_(grid), st_(grid), spectrum_(st_.analyze(values)) {
        residual_ = st_.synthesize(spectrum_);
        for (std::size_t i = 0; i < residual_.size(); ++i)
            residual_[i] = values[i] - residual_[i];
    }

    double eval(const Vec<3>& v) const {
        return st_.eval(spectrum_, v) + sphere_interpolate(grid_, residual_, v);
    }

  private:
    SphereGrid<3> grid_;
    SphereTransform st_;
    SphereSpectrum spectrum_;
    std::vector<double> residual_;
};

}  // namespace conetomo
