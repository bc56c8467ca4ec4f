#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "conetomo/geometry.hpp"
#include "conetomo/gridfield.hpp"
#include "conetomo/phantom.hpp"
#include "conetomo/quadrature.hpp"
#include "conetomo/report.hpp"
#include "conetomo/vec.hpp"

namespace conetomo {

// ---------------------------------------------------------------------------
// Weighted ray integral u(a, v) = int_0^inf f(a + r v) r^k dr.
// ---------------------------------------------------------------------------

namespace detail {

// Clip the ray against each term ball; returns sorted breakpoints of the
// union of hit intervals. Empty means the ray misses the support entirely.
template <int N>
void ray_breakpoints(const ScalarField<N>& f, const Vec<N>& a, const Vec<N>& v,
                     std::vector<double>& breaks) {
    breaks.clear();
    for (const auto& t : f.terms) {
        const Vec<N> d = a - t.center;
        const double b = dot(d, v);
        const double c = norm2(d) - t.radius * t.radius;
        const double disc = b * b - c;
        if (disc <= 0.0) continue;
        const double s = std::sqrt(disc);
        double lo = -b - s, hi = -b + s;
        if (hi <= 0.0) continue;
        lo = std::max(lo, 0.0);
        breaks.push_back(lo);
        breaks.push_back(hi);
    }
    std::sort(breaks.begin(), breaks.end());
}

template <int N>
double min_term_diameter(const ScalarField<N>& f) {
    double r = std::numeric_limits<double>::infinity();
    for (const auto& t : f.terms) r = std::min(r, t.radius);
    return 2.0 * r;
}

}  // namespace detail

/// Panel subdivision bound: subsegments no longer than (smallest ball
/// diameter) / panel_divisor, 16-point Gauss-Legendre per panel.
inline constexpr int ray_gauss_points = 16;
inline constexpr int ray_panel_divisor = 32;

/// k-weighted divergent beam transform of a bump-sum field. Exactly zero when
/// the ray misses every support ball; panel boundaries sit on ball entry/exit
/// points so every panel integrand is smooth.
template <int N>
double divergent_beam(const ScalarField<N>& field, const Vec<N>& a, const Vec<N>& v, int k) {
    if (k < 0) throw std::invalid_argument("divergent_beam: weight order must be >= 0");
    thread_local std::vector<double> breaks;
    detail::ray_breakpoints(field, a, v, breaks);
    if (breaks.empty()) return 0.0;
    const double panel_max = detail::min_term_diameter(field) / ray_panel_divisor;
    const QuadRule& gl = gauss_legendre_cached(ray_gauss_points);
    double total = 0;
    for (std::size_t seg = 0; seg + 1 < breaks.size(); ++seg) {
        const double lo = breaks[seg], hi = breaks[seg + 1];
        if (hi - lo < 1e-15) continue;
        const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / panel_max)));
        const double h = (hi - lo) / panels;
        for (int p = 0; p < panels; ++p) {
            const double mid = lo + (p + 0.5) * h;
            double acc = 0;
            for (int q = 0; q < ray_gauss_points; ++q) {
                const double r = mid + 0.5 * h * gl.nodes[q];
                double w = gl.weights[q];
                for (int j = 0; j < k; ++j) w *= r;
                acc += w * field.eval(ray_point(a, r, v));
            }
            total += 0.5 * h * acc;
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Beam data: an evaluable u(a, v) with its domain and provenance.
// ---------------------------------------------------------------------------

template <int N>
struct BeamData {
    enum class Provenance { computed_from_field, external };

    int k = 0;
    std::function<double(const Vec<N>&, const Vec<N>&)> eval;
    std::function<bool(const Vec<N>&)> in_domain;  // empty means all of R^n
    Provenance provenance = Provenance::external;

    bool contains(const Vec<N>& a) const { return !in_domain || in_domain(a); }
};

template <int N>
BeamData<N> beam_from_field(const ScalarField<N>& field, int k) {
    BeamData<N> u;
    u.k = k;
    u.provenance = BeamData<N>::Provenance::computed_from_field;
    u.eval = [field, k](const Vec<N>& a, const Vec<N>& v) {
        return divergent_beam(field, a, v, k);
    };
    return u;
}

// ---------------------------------------------------------------------------
// Directional derivatives (D_v)^j along the source variable.
// ---------------------------------------------------------------------------

namespace detail {

// Order-2 central stencils for phi^(j)(0).
template <class F>
double central_fd(const F& phi, int j, double tau) {
    switch (j) {
        case 1: return (phi(tau) - phi(-tau)) / (2.0 * tau);
        case 2: return (phi(tau) - 2.0 * phi(0.0) + phi(-tau)) / (tau * tau);
        case 3:
            return (phi(2.0 * tau) - 2.0 * phi(tau) + 2.0 * phi(-tau) - phi(-2.0 * tau)) /
                   (2.0 * tau * tau * tau);
        default: throw std::invalid_argument("central_fd: order out of range");
    }
}

}  // namespace detail

/// Largest stencil offset used by directional_derivative at step tau.
inline double fd_stencil_reach(int j, double tau) { return (j >= 3 ? 2.0 : 1.0) * tau; }

/// (D_v)^j u(a, v) by order-2 central differences with one Richardson level
/// (steps tau and tau/2), leading error O(tau^4). j = 0 returns u itself.
template <int N>
double directional_derivative(const BeamData<N>& u, const Vec<N>& a, const Vec<N>& v, int j,
                              double tau) {
    if (j == 0) return u.eval(a, v);
    if (j > 3) throw std::invalid_argument("directional_derivative: order must be <= 3");
    if (!(tau > 0)) throw std::invalid_argument("directional_derivative: step must be positive");
    const double reach = fd_stencil_reach(j, tau);
    if (!u.contains(ray_point(a, reach, v)) || !u.contains(ray_point(a, -reach, v)))
        throw std::domain_error("directional_derivative: stencil exits domain");
    const auto phi = [&](double t) { return u.eval(ray_point(a, t, v), v); };
    const double coarse = detail::central_fd(phi, j, tau);
    const double fine = detail::central_fd(phi, j, 0.5 * tau);
    return (4.0 * fine - coarse) / 3.0;
}

/// One-sided derivative at a boundary point, stencil stepping inward along
/// -v: nodes a, a - tau v, a - 2 tau v, a - 3 tau v. Orders j = 0, 1, 2.
template <class F>
double one_sided_derivative(const F& u_at, int j, double tau) {
    switch (j) {
        case 0: return u_at(0.0);
        case 1:
            return (11.0 * u_at(0.0) - 18.0 * u_at(-tau) + 9.0 * u_at(-2.0 * tau) -
                    2.0 * u_at(-3.0 * tau)) /
                   (6.0 * tau);
        case 2:
            return (2.0 * u_at(0.0) - 5.0 * u_at(-tau) + 4.0 * u_at(-2.0 * tau) -
                    u_at(-3.0 * tau)) /
                   (tau * tau);
        default: throw std::invalid_argument("one_sided_derivative: order out of range");
    }
}

// ---------------------------------------------------------------------------
// Transport boundary-value range check.
// ---------------------------------------------------------------------------

/// Well-separated direction subset used for the directional-independence
/// condition: all of it evaluable for any source point.
template <int N>
std::vector<Vec<N>> independence_directions() {
    std::vector<Vec<N>> dirs;
    if constexpr (N == 2) {
        for (int j = 0; j < 8; ++j) {
            const double th = std::numbers::pi * j / 4.0;
            dirs.push_back(Vec<2>{std::cos(th), std::sin(th)});
        }
    } else {
        for (int i = 0; i < 3; ++i) {
            dirs.push_back(axis_unit<3>(i));
            dirs.push_back(-axis_unit<3>(i));
        }
        const double s = 1.0 / std::sqrt(3.0);
        dirs.push_back(Vec<3>{s, s, s});
        dirs.push_back(Vec<3>{-s, -s, -s});
    }
    return dirs;
}

struct BvpConfig {
    int interior_per_axis = 9;     // sample lattice across the bounding box
    int boundary_count = 24;       // boundary points per check
    double fd_step = 0.0;          // 0: use 0.002 * diameter
    double tol_interior = 1e-4;
    double tol_boundary = 1e-4;
};

/// Checks the order-(k+1) transport boundary-value conditions:
///   interior: (D_v)^{k+1} u = (-1)^{k+1} k! f   (or v-independence if f absent),
///   outflow boundary: (D_v)^j u = 0 for j = 0..k.
/// Residuals are normalized by max(1, sup |u|) over the sampled set.
template <int N>
ConsistencyReport check_transport_bvp(const BeamData<N>& u, const ConvexVertexSet<N>& A, int k,
                                      const ScalarField<N>* f = nullptr,
                                      const BvpConfig& cfg = {}) {
    if (k < 0 || k > 2) throw std::invalid_argument("check_transport_bvp: k must be in {0,1,2}");
    const double tau = cfg.fd_step > 0 ? cfg.fd_step : 0.002 * A.diameter();
    const auto dirs = independence_directions<N>();
    double sup_u = 0;

    // Interior sample points: lattice nodes with stencil clearance in A.
    Vec<N> lo, hi;
    for (int i = 0; i < N; ++i) {
        lo[i] = A.center[i] - A.radii[i];
        hi[i] = A.center[i] + A.radii[i];
    }
    const GridSpec<N> lattice = GridSpec<N>::centered_box(lo, hi, cfg.interior_per_axis);
    const double reach = fd_stencil_reach(k + 1, tau);
    std::vector<Vec<N>> interior;
    for (std::int64_t fidx = 0; fidx < lattice.size(); ++fidx) {
        const Vec<N> a = lattice.node(lattice.unflat(fidx));
        if (!A.contains(a)) continue;
        bool clear = true;
        for (const auto& v : dirs)
            if (exit_time(A, a, v) < reach || exit_time(A, a, -v) < reach) clear = false;
        if (clear) interior.push_back(a);
    }

    double res_field = 0, res_indep = 0;
    const double sign = (k + 1) % 2 == 0 ? 1.0 : -1.0;
    double kfact = 1;
    for (int j = 2; j <= k; ++j) kfact *= j;
    for (const auto& a : interior) {
        double dmin = std::numeric_limits<double>::infinity();
        double dmax = -dmin;
        for (const auto& v : dirs) {
            const double d = directional_derivative(u, a, v, k + 1, tau);
            dmin = std::min(dmin, d);
            dmax = std::max(dmax, d);
            sup_u = std::max(sup_u, std::abs(u.eval(a, v)));
            if (f) res_field = std::max(res_field, std::abs(d - sign * kfact * f->eval(a)));
        }
        res_indep = std::max(res_indep, dmax - dmin);
    }

    // Outflow boundary: one-sided stencils stepping inward.
    double res_boundary[3] = {0, 0, 0};
    int boundary_used = 0;
    for (int b = 0; b < cfg.boundary_count; ++b) {
        // Deterministic boundary sweep in scaled direction space.
        Vec<N> omega;
        if constexpr (N == 2) {
            const double th = 2.0 * std::numbers::pi * b / cfg.boundary_count;
            omega = Vec<2>{std::cos(th), std::sin(th)};
        } else {
            const double z = -1.0 + 2.0 * (b + 0.5) / cfg.boundary_count;
            const double th = 2.4 * b;  // spiral sweep
            const double rho = std::sqrt(1.0 - z * z);
            omega = Vec<3>{rho * std::cos(th), rho * std::sin(th), z};
        }
        const Vec<N> a = A.boundary_point(omega);
        const Vec<N> n = A.unit_normal(a);
        for (const auto& v : dirs) {
            if (dot(v, n) <= 1e-8) continue;                    // not outflow
            if (exit_time(A, a, -v) < 3.0 * tau + 1e-12) continue;  // grazing, stencil exits
            ++boundary_used;
            const auto u_at = [&](double t) { return u.eval(ray_point(a, t, v), v); };
            for (int j = 0; j <= k; ++j)
                res_boundary[j] = std::max(res_boundary[j], std::abs(one_sided_derivative(u_at, j, tau)));
            sup_u = std::max(sup_u, std::abs(u.eval(a, v)));
        }
    }

    const double norm = std::max(1.0, sup_u);
    ConsistencyReport report;
    if (f) report.add("interior_transport", res_field / norm, cfg.tol_interior);
    report.add("directional_independence", res_indep / norm, cfg.tol_interior);
    for (int j = 0; j <= k; ++j)
        report.add("boundary_j" + std::to_string(j), res_boundary[j] / norm, cfg.tol_boundary);
    report.add_informational("samples_interior", static_cast<double>(interior.size()), "count");
    report.add_informational("samples_boundary", static_cast<double>(boundary_used), "count");
    return report;
}

// ---------------------------------------------------------------------------
// Reconstruction f(a) = ((-1)^{k+1} / k!) (D_v)^{k+1} u(a, v).
// ---------------------------------------------------------------------------

template <int N>
GridField<N> reconstruct_from_beam(const BeamData<N>& u, const ConvexVertexSet<N>& A, int k,
                                   const Vec<N>& v, const GridSpec<N>& out,
                                   double fd_step = 0.0) {
    if (k < 0 || k > 2) throw std::invalid_argument("reconstruct_from_beam: k must be in {0,1,2}");
    const double tau = fd_step > 0 ? fd_step : 0.002 * A.diameter();
    const double reach = fd_stencil_reach(k + 1, tau);
    const double sign = (k + 1) % 2 == 0 ? 1.0 : -1.0;
    double kfact = 1;
    for (int j = 2; j <= k; ++j) kfact *= j;
    GridField<N> out_field(out);
    for (std::int64_t fidx = 0; fidx < out.size(); ++fidx) {
        const Vec<N> a = out.node(out.unflat(fidx));
        if (!A.contains(a) || exit_time(A, a, v) < reach || exit_time(A, a, -v) < reach) {
            out_field.valid[fidx] = 0;  // node too close to the boundary for the stencil
            continue;
        }
        out_field.values[fidx] =
            sign / kfact * directional_derivative(u, a, v, k + 1, tau);
    }
    return out_field;
}

}  // namespace conetomo
