#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "conetomo/geometry.hpp"
#include "conetomo/report.hpp"
#include "conetomo/sphharm.hpp"
#include "conetomo/vec.hpp"

namespace conetomo {

// ---------------------------------------------------------------------------
// Functions on the sphere.
// ---------------------------------------------------------------------------

/// Evaluable function on S^{n-1}; either analytic or interpolated from grid
/// samples. The interpolated variant reproduces its own nodes exactly.
template <int N>
struct SphereFunction {
    std::function<double(const Vec<N>&)> eval;

    static SphereFunction analytic(std::function<double(const Vec<N>&)> fn) {
        return SphereFunction{std::move(fn)};
    }

    static SphereFunction from_samples(const SphereGrid<N>& grid, std::vector<double> values) {
        if (static_cast<int>(values.size()) != grid.size())
            throw std::invalid_argument("SphereFunction: sample count mismatch");
        SphereFunction f;
        if constexpr (N == 2) {
            f.eval = [interp = CircleInterpolant(values)](const Vec<2>& v) {
                return interp.eval(std::atan2(v[1], v[0]));
            };
        } else {
            f.eval = [interp = std::make_shared<SphereInterpolant>(grid, values)](const Vec<3>& v) {
                return interp->eval(v);
            };
        }
        return f;
    }
};

/// Sampled section transform values on (beta grid) x (uniform s grid).
/// The s grid is symmetric, s_j = -s_max + j * ds with ds = 2 s_max/(ns-1),
/// so s and -s are both nodes.
template <int N>
struct SectionData {
    SphereGrid<N> beta;
    int ns = 0;
    double s_max = 0;
    std::vector<double> values;  // [beta index][s index], row-major

    double s(int j) const { return -s_max + j * (2.0 * s_max / (ns - 1)); }
    double ds() const { return 2.0 * s_max / (ns - 1); }
    double& at(int ib, int is) { return values[static_cast<std::size_t>(ib) * ns + is]; }
    double at(int ib, int is) const { return values[static_cast<std::size_t>(ib) * ns + is]; }

    double sup_abs() const {
        double m = 0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
};

// ---------------------------------------------------------------------------
// Forward transform: S g(beta, s) = (1-s^2)^{(n-2)/2} int_{S^{n-2}}
// g(s beta + sqrt(1-s^2) omega) d omega, omega running over beta^perp.
// ---------------------------------------------------------------------------

template <int N>
double spherical_section(const SphereFunction<N>& g, const Vec<N>& beta, double s,
                         int circle_nodes = 64) {
    if (!(std::abs(s) < 1.0)) throw std::domain_error("spherical_section: need |s| < 1");
    const double c = std::sqrt(1.0 - s * s);
    const auto basis = orthonormal_complement(beta);
    if constexpr (N == 2) {
        // S^0 = two points; the (1-s^2)^0 prefactor is 1.
        const Vec<2> center = s * beta;
        return g.eval(center + c * basis[0]) + g.eval(center - c * basis[0]);
    } else {
        double acc = 0;
        const double dtheta = 2.0 * std::numbers::pi / circle_nodes;
        for (int j = 0; j < circle_nodes; ++j) {
            const double th = dtheta * j;
            const Vec<3> omega = std::cos(th) * basis[0] + std::sin(th) * basis[1];
            acc += g.eval(s * beta + c * omega);
        }
        return c * acc * dtheta;
    }
}

/// Fill a SectionData grid from an evaluable sphere function.
template <int N>
SectionData<N> forward_section(const SphereFunction<N>& g, const SphereGrid<N>& beta_grid,
                               int ns, double s_max, int circle_nodes = 64) {
    if (ns < 2 || !(s_max > 0) || !(s_max < 1))
        throw std::invalid_argument("forward_section: bad s grid");
    SectionData<N> data;
    data.beta = beta_grid;
    data.ns = ns;
    data.s_max = s_max;
    data.values.assign(static_cast<std::size_t>(beta_grid.size()) * ns, 0.0);
    for (int ib = 0; ib < beta_grid.size(); ++ib)
        for (int is = 0; is < ns; ++is)
            data.at(ib, is) = spherical_section(g, beta_grid.nodes[ib], data.s(is), circle_nodes);
    return data;
}

// ---------------------------------------------------------------------------
// Endpoint limit: h(beta) = lim_{s->1} g(beta,s) / (|S^{n-2}| (1-s^2)^{(n-2)/2}).
// ---------------------------------------------------------------------------

namespace detail {

/// Least-squares quadratic fit in x evaluated at x = 0.
inline double quadratic_extrapolate(const std::vector<double>& x, const std::vector<double>& y) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, b0 = 0, b1 = 0, b2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i], xi2 = xi * xi;
        s0 += 1;
        s1 += xi;
        s2 += xi2;
        s3 += xi2 * xi;
        s4 += xi2 * xi2;
        b0 += y[i];
        b1 += y[i] * xi;
        b2 += y[i] * xi2;
    }
    // Solve the 3x3 normal equations by Cramer's rule.
    const double det = s0 * (s2 * s4 - s3 * s3) - s1 * (s1 * s4 - s2 * s3) +
                       s2 * (s1 * s3 - s2 * s2);
    if (det == 0.0) throw std::runtime_error("quadratic_extrapolate: singular fit");
    const double c0 = (b0 * (s2 * s4 - s3 * s3) - s1 * (b1 * s4 - b2 * s3) +
                       s2 * (b1 * s3 - b2 * s2)) /
                      det;
    return c0;
}

}  // namespace detail

/// Extracts the limit at a beta grid node by evaluating the normalized ratio
/// at the 4 largest s values and extrapolating quadratically in (1 - s).
template <int N>
double sst_limit(const SectionData<N>& gdata, int beta_index) {
    if (gdata.s_max < 0.9) throw std::domain_error("sst_limit: s grid must reach 0.9");
    if (gdata.ns < 4) throw std::domain_error("sst_limit: need at least 4 s nodes");
    const double area = sphere_area(N - 1);
    std::vector<double> xs, ys;
    for (int is = gdata.ns - 4; is < gdata.ns; ++is) {
        const double s = gdata.s(is);
        const double scale = area * std::pow(1.0 - s * s, (N - 2) / 2.0);
        const double r = gdata.at(beta_index, is) / scale;
        if (!std::isfinite(r)) throw std::domain_error("sst_limit: non-finite ratio");
        xs.push_back(1.0 - s);
        ys.push_back(r);
    }
    return detail::quadratic_extrapolate(xs, ys);
}

/// Limit at an arbitrary unit vector: nearest node if it is one, otherwise
/// spectral interpolation of the top s rows before extrapolating.
template <int N>
double sst_limit(const SectionData<N>& gdata, const Vec<N>& beta) {
    for (int ib = 0; ib < gdata.beta.size(); ++ib)
        if (norm(gdata.beta.nodes[ib] - beta) < 1e-12) return sst_limit(gdata, ib);
    const double area = sphere_area(N - 1);
    std::vector<double> xs, ys, row(gdata.beta.size());
    for (int is = gdata.ns - 4; is < gdata.ns; ++is) {
        for (int ib = 0; ib < gdata.beta.size(); ++ib) row[ib] = gdata.at(ib, is);
        const double s = gdata.s(is);
        const double scale = area * std::pow(1.0 - s * s, (N - 2) / 2.0);
        double g;
        if constexpr (N == 2) {
            g = circle_interpolate(row, std::atan2(beta[1], beta[0]));
        } else {
            g = sphere_interpolate(gdata.beta, row, beta);
        }
        const double r = g / scale;
        if (!std::isfinite(r)) throw std::domain_error("sst_limit: non-finite ratio");
        xs.push_back(1.0 - s);
        ys.push_back(r);
    }
    return detail::quadratic_extrapolate(xs, ys);
}

// ---------------------------------------------------------------------------
// Range check: evenness, annihilating PDE, endpoint limit.
// ---------------------------------------------------------------------------

struct SstTolerances {
    double evenness = 1e-10;
    double pde = 1e-4;
    double limit_tail = 1e-5;  // spectral-tail smoothness surrogate
};

namespace detail {

// 6th-order central stencils on a uniform grid (7 points).
inline double fd7_d1(const double* g, int i, double ds) {
    return (-g[i - 3] + 9 * g[i - 2] - 45 * g[i - 1] + 45 * g[i + 1] - 9 * g[i + 2] +
            g[i + 3]) /
           (60.0 * ds);
}
inline double fd7_d2(const double* g, int i, double ds) {
    return (2 * g[i - 3] - 27 * g[i - 2] + 270 * g[i - 1] - 490 * g[i] + 270 * g[i + 1] -
            27 * g[i + 2] + 2 * g[i + 3]) /
           (180.0 * ds * ds);
}

}  // namespace detail

/// Checks membership in the section-transform range:
///   (a) evenness g(-beta, -s) = g(beta, s),
///   (b) [(1-s^2) d2_s + (n-3) s d_s + (n-2)/(1-s^2) - Lap_sphere] g = 0,
///   (c) normalized endpoint limits exist and form a smooth sphere function.
/// The PDE residual is evaluated at |s| bounded away from the endpoints so
/// the s stencils stay interior; residuals normalized by max(1, sup |g|).
template <int N>
ConsistencyReport check_sst_range(const SectionData<N>& gdata, const SstTolerances& tol = {}) {
    const int nb = gdata.beta.size(), ns = gdata.ns;
    if (!gdata.beta.antipodally_closed())
        throw std::invalid_argument("check_sst_range: beta grid not antipodally closed");
    const double norm_g = std::max(1.0, gdata.sup_abs());

    ConsistencyReport report;

    // Evenness: -s is a grid node by symmetry of the s grid.
    double res_even = 0;
    for (int ib = 0; ib < nb; ++ib) {
        const int ia = gdata.beta.antipode(ib);
        for (int is = 0; is < ns; ++is)
            res_even = std::max(res_even,
                                std::abs(gdata.at(ia, ns - 1 - is) - gdata.at(ib, is)));
    }
    report.add("sst_evenness", res_even / norm_g, tol.evenness);

    // PDE residual. The operator
    //   (1-s^2) d2_s + (n-3) s d_s + (n-2)/(1-s^2) - Lap_beta
    // applied to g equals, identically,
    //   (1-s^2)^{(n-2)/2} [ (1-s^2) d2_s - (n-1) s d_s - Lap_beta ]  r,
    // with r = g / (1-s^2)^{(n-2)/2}. The second form is evaluated because r
    // of in-range data is smooth up to the endpoints, so the s stencils do
    // not see the endpoint factor's derivative blowup.
    std::optional<SphereTransform> st;
    if constexpr (N == 3) st.emplace(gdata.beta);
    std::vector<double> prefac(ns);
    for (int is = 0; is < ns; ++is)
        prefac[is] = std::pow(1.0 - gdata.s(is) * gdata.s(is), (N - 2) / 2.0);
    std::vector<double> col(nb);
    std::vector<std::vector<double>> lap(ns);
    for (int is = 0; is < ns; ++is) {
        for (int ib = 0; ib < nb; ++ib) col[ib] = gdata.at(ib, is) / prefac[is];
        if constexpr (N == 2) {
            lap[is] = circle_laplacian(col);
        } else {
            lap[is] = st->laplacian(col);
        }
    }
    double res_pde = 0;
    const double ds = gdata.ds();
    std::vector<double> row(ns);
    for (int ib = 0; ib < nb; ++ib) {
        for (int is = 0; is < ns; ++is) row[is] = gdata.at(ib, is) / prefac[is];
        for (int is = 3; is < ns - 3; ++is) {
            const double s = gdata.s(is);
            if (std::abs(s) > 0.901) continue;
            const double val = (1.0 - s * s) * detail::fd7_d2(row.data(), is, ds) -
                               (N - 1) * s * detail::fd7_d1(row.data(), is, ds) - lap[is][ib];
            res_pde = std::max(res_pde, std::abs(prefac[is] * val));
        }
    }
    report.add("sst_pde", res_pde / norm_g, tol.pde);

    // Endpoint limit: finite everywhere, spectrally smooth over beta.
    std::vector<double> limit(nb);
    bool finite = true;
    for (int ib = 0; ib < nb; ++ib) {
        try {
            limit[ib] = sst_limit(gdata, ib);
        } catch (const std::domain_error&) {
            finite = false;
            limit[ib] = 0;
        }
        if (!std::isfinite(limit[ib])) finite = false;
    }
    report.add("sst_limit_finite", finite ? 0.0 : 1.0, 0.5);
    double tail = 0;
    const double limit_scale = [&] {
        double m = 0;
        for (double v : limit) m = std::max(m, std::abs(v));
        return m;
    }();
    if (finite && limit_scale > 1e-14 * norm_g) {
        if constexpr (N == 2) {
            tail = circle_tail_fraction(limit, (2 * gdata.beta.L) / 3);
        } else {
            tail = st->tail_fraction(limit, (2 * gdata.beta.L) / 3);
        }
    }
    report.add("sst_limit_smooth", tail, tol.limit_tail, "heuristic");
    return report;
}

}  // namespace conetomo
