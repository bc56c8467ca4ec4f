#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "conetomo/quadrature.hpp"
#include "conetomo/vec.hpp"

namespace conetomo {

inline constexpr double boundary_tol = 1e-10;  // in scaled coordinates

/// Open bounded convex vertex set: a ball or an axis-aligned ellipsoid.
/// In scaled coordinates y_i = (x_i - center_i)/radii_i the set is {|y| < 1},
/// which makes exit times and normals exact.
template <int N>
struct ConvexVertexSet {
    enum class Kind { ball, ellipsoid };
    Kind kind = Kind::ball;
    Vec<N> center{};
    Vec<N> radii{};  // all equal for a ball

    static ConvexVertexSet unit_ball() {
        ConvexVertexSet s;
        for (int i = 0; i < N; ++i) s.radii[i] = 1.0;
        return s;
    }
    static ConvexVertexSet ball(const Vec<N>& c, double r) {
        ConvexVertexSet s;
        s.center = c;
        for (int i = 0; i < N; ++i) s.radii[i] = r;
        return s;
    }
    static ConvexVertexSet ellipsoid(const Vec<N>& c, const Vec<N>& r) {
        ConvexVertexSet s;
        s.kind = Kind::ellipsoid;
        s.center = c;
        s.radii = r;
        for (int i = 0; i < N; ++i)
            if (!(r[i] > 0)) throw std::invalid_argument("ellipsoid: radii must be positive");
        return s;
    }

    Vec<N> scaled(const Vec<N>& x) const {
        Vec<N> y;
        for (int i = 0; i < N; ++i) y[i] = (x[i] - center[i]) / radii[i];
        return y;
    }

    double scaled_radius(const Vec<N>& x) const { return norm(scaled(x)); }

    bool contains(const Vec<N>& x) const { return scaled_radius(x) < 1.0; }
    bool contains_closure(const Vec<N>& x) const { return scaled_radius(x) <= 1.0 + boundary_tol; }
    bool on_boundary(const Vec<N>& x) const {
        return std::abs(scaled_radius(x) - 1.0) <= boundary_tol;
    }

    /// Outward unit normal at a boundary point.
    Vec<N> unit_normal(const Vec<N>& a) const {
        if (!on_boundary(a)) throw std::domain_error("unit_normal: point not on boundary");
        Vec<N> g;
        for (int i = 0; i < N; ++i) g[i] = (a[i] - center[i]) / (radii[i] * radii[i]);
        return normalized(g);
    }

    /// Boundary point in the scaled direction omega (|omega| = 1).
    Vec<N> boundary_point(const Vec<N>& omega) const {
        Vec<N> p;
        for (int i = 0; i < N; ++i) p[i] = center[i] + radii[i] * omega[i];
        return p;
    }

    double diameter() const {
        double r = 0;
        for (int i = 0; i < N; ++i) r = std::max(r, radii[i]);
        return 2.0 * r;
    }
};

/// Forward exit time tau+(a, v) = inf{t > 0 : a + t v outside}, for a in the
/// closure. Exact root of the scaled quadratic; 0 on the outflow boundary.
template <int N>
double exit_time(const ConvexVertexSet<N>& A, const Vec<N>& a, const Vec<N>& v) {
    const Vec<N> y0 = A.scaled(a);
    if (norm(y0) > 1.0 + boundary_tol)
        throw std::domain_error("exit_time: point outside the closed set");
    Vec<N> w;
    for (int i = 0; i < N; ++i) w[i] = v[i] / A.radii[i];
    const double qa = norm2(w);
    const double qb = dot(y0, w);
    const double qc = norm2(y0) - 1.0;
    const double disc = qb * qb - qa * qc;
    if (disc <= 0.0) return 0.0;  // grazing from the boundary
    const double t = (-qb + std::sqrt(disc)) / qa;
    return t > 0.0 ? t : 0.0;
}

/// Outflow predicate: a on the boundary and v * n(a) > 0.
template <int N>
bool is_outflow(const ConvexVertexSet<N>& A, const Vec<N>& a, const Vec<N>& v) {
    return dot(v, A.unit_normal(a)) > 0.0;
}

/// Surface measure of S^{n-1}.
inline double sphere_area(int n) {
    switch (n) {
        case 1: return 2.0;                       // S^0, two points
        case 2: return 2.0 * std::numbers::pi;    // circle
        case 3: return 4.0 * std::numbers::pi;    // sphere
        default: throw std::invalid_argument("sphere_area: dim out of range");
    }
}

/// Quadrature grid on S^{n-1}, antipodally closed by construction:
/// node(antipode(i)) == -node(i) bit for bit.
///   n=2: 2L uniform angles, weight pi/L.
///   n=3: L Gauss-Legendre polar cosines x 2L uniform azimuths; exact for
///        spherical harmonics up to degree L-1.
template <int N>
struct SphereGrid {
    int L = 0;
    std::vector<Vec<N>> nodes;
    std::vector<double> weights;
    // n=3 structure (polar ring index i, azimuth index j -> i*2L + j)
    std::vector<double> polar_mu;      // GL nodes, ascending (n=3)
    std::vector<double> polar_weight;  // GL weights (n=3)

    int size() const { return static_cast<int>(nodes.size()); }

    int antipode(int i) const {
        if constexpr (N == 2) {
            return (i + L) % (2 * L);
        } else {
            const int ring = i / (2 * L), az = i % (2 * L);
            return (L - 1 - ring) * 2 * L + (az + L) % (2 * L);
        }
    }

    bool antipodally_closed() const {
        for (int i = 0; i < size(); ++i)
            if (!(nodes[antipode(i)] == -nodes[i])) return false;
        return true;
    }
};

template <int N>
SphereGrid<N> sphere_grid(int L) {
    static_assert(N == 2 || N == 3);
    if (L < 4) throw std::invalid_argument("sphere_grid: resolution must be >= 4");
    SphereGrid<N> g;
    g.L = L;
    if constexpr (N == 2) {
        g.nodes.resize(2 * L);
        g.weights.assign(2 * L, std::numbers::pi / L);
        for (int j = 0; j < L; ++j) {
            const double th = std::numbers::pi * j / L;
            g.nodes[j] = Vec<2>{std::cos(th), std::sin(th)};
            g.nodes[j + L] = -g.nodes[j];
        }
    } else {
        const QuadRule gl = gauss_legendre(L);
        g.polar_mu = gl.nodes;
        g.polar_weight = gl.weights;
        g.nodes.resize(2 * L * L);
        g.weights.resize(2 * L * L);
        // Azimuth pairs (j, j+L) built together so antipodes are exact; the
        // polar mirror uses the exact antisymmetry of the GL nodes.
        std::vector<double> ca(2 * L), sa(2 * L);
        for (int j = 0; j < L; ++j) {
            const double ph = std::numbers::pi * j / L;
            ca[j] = std::cos(ph);
            sa[j] = std::sin(ph);
            ca[j + L] = -ca[j];
            sa[j + L] = -sa[j];
        }
        for (int i = 0; i < L; ++i) {
            const double mu = gl.nodes[i];
            const double rho = std::sqrt(1.0 - mu * mu);
            for (int j = 0; j < 2 * L; ++j) {
                g.nodes[i * 2 * L + j] = Vec<3>{rho * ca[j], rho * sa[j], mu};
                g.weights[i * 2 * L + j] = gl.weights[i] * std::numbers::pi / L;
            }
        }
        // Enforce exact node antipodality against roundoff in rho.
        for (int i = 0; i < L / 2; ++i) {
            for (int j = 0; j < 2 * L; ++j) {
                const int idx = i * 2 * L + j;
                g.nodes[g.antipode(idx)] = -g.nodes[idx];
            }
        }
    }
    return g;
}

/// Deterministic orthonormal basis of beta^perp: Householder reflection
/// mapping e_n to +/-beta, applied to e_1..e_{n-1}. The sign is chosen so
/// the reflection vector never degenerates.
template <int N>
std::vector<Vec<N>> orthonormal_complement(const Vec<N>& beta) {
    const Vec<N> en = axis_unit<N>(N - 1);
    const double s = beta[N - 1] >= 0.0 ? 1.0 : -1.0;
    const Vec<N> q = en + s * beta;  // |q|^2 = 2(1 + |beta_n|), never small
    const double q2 = norm2(q);
    std::vector<Vec<N>> basis(N - 1);
    for (int i = 0; i < N - 1; ++i) {
        Vec<N> e = axis_unit<N>(i);
        basis[i] = e - (2.0 * q[i] / q2) * q;
    }
    return basis;
}

}  // namespace conetomo
