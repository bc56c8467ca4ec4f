#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "conetomo/beam.hpp"
#include "conetomo/geometry.hpp"
#include "conetomo/gridfield.hpp"
#include "conetomo/parallel.hpp"
#include "conetomo/phantom.hpp"
#include "conetomo/planar.hpp"
#include "conetomo/report.hpp"
#include "conetomo/spherical.hpp"
#include "conetomo/vec.hpp"

namespace conetomo {

// ---------------------------------------------------------------------------
// Cone transform values g(a, beta, s) on vertex x direction x cosine grids.
// ---------------------------------------------------------------------------

/// Gridded cone data. Convex geometry: vertices form an axis-aligned lattice
/// covering the bounding box of the vertex set (plus padding, so derivative
/// stencils near the boundary stay on data). Planar geometry: vertices are
/// (abar, 0) on a detector-plane lattice.
template <int N>
struct ConeData {
    enum class Geometry { convex, planar };

    Geometry geometry = Geometry::convex;
    int k = 0;
    int lattice_dims = N;  // N for convex, N-1 for planar
    Vec<N> lat_origin{};
    Vec<N> lat_spacing{};
    std::array<int, N> lat_shape{};  // unused trailing axes = 1
    SphereGrid<N> beta;
    int ns = 0;
    double s_max = 0;
    std::vector<double> values;  // [vertex][beta][s], row-major

    std::int64_t vertex_count() const {
        std::int64_t c = 1;
        for (int i = 0; i < lattice_dims; ++i) c *= lat_shape[i];
        return c;
    }
    Vec<N> vertex(std::int64_t vf) const {
        Vec<N> p{};
        for (int i = lattice_dims - 1; i >= 0; --i) {
            p[i] = lat_origin[i] + double(vf % lat_shape[i]) * lat_spacing[i];
            vf /= lat_shape[i];
        }
        return p;
    }
    double s(int is) const { return -s_max + is * (2.0 * s_max / (ns - 1)); }
    double& at(std::int64_t vf, int ib, int is) {
        return values[(vf * beta.size() + ib) * ns + is];
    }
    double at(std::int64_t vf, int ib, int is) const {
        return values[(vf * beta.size() + ib) * ns + is];
    }
    double sup_abs() const {
        double m = 0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
};

// ---------------------------------------------------------------------------
// Forward transforms.
// ---------------------------------------------------------------------------

/// Cone transform through the factorization: the section transform of the
/// beam transform v -> R^k f(a, v).
template <int N>
double cone_composed(const ScalarField<N>& field, const Vec<N>& a, const Vec<N>& beta, double s,
                     int k, int circle_nodes = 64) {
    const auto ray = SphereFunction<N>::analytic(
        [&field, &a, k](const Vec<N>& v) { return divergent_beam(field, a, v, k); });
    return spherical_section(ray, beta, s, circle_nodes);
}

/// Precomputed nonzero field samples on a cell-centered volume grid covering
/// the support; shared across oracle evaluations of one phantom.
template <int N>
struct VolumeSamples {
    std::vector<Vec<N>> points;
    std::vector<double> fvals;
    double cell_volume = 0;
};

template <int N>
VolumeSamples<N> make_volume_samples(const ScalarField<N>& field, int cells_per_axis) {
    VolumeSamples<N> vs;
    Vec<N> lo, hi;
    field.bounding_box(lo, hi);
    Vec<N> dx;
    vs.cell_volume = 1.0;
    for (int i = 0; i < N; ++i) {
        dx[i] = (hi[i] - lo[i]) / cells_per_axis;
        vs.cell_volume *= dx[i];
    }
    std::int64_t total = 1;
    for (int i = 0; i < N; ++i) total *= cells_per_axis;
    for (std::int64_t f = 0; f < total; ++f) {
        std::int64_t rem = f;
        Vec<N> x;
        for (int i = N - 1; i >= 0; --i) {
            x[i] = lo[i] + (double(rem % cells_per_axis) + 0.5) * dx[i];
            rem /= cells_per_axis;
        }
        const double v = field.eval(x);
        if (v != 0.0) {
            vs.points.push_back(x);
            vs.fvals.push_back(v);
        }
    }
    return vs;
}

/// Volumetric oracle straight from the delta form: sqrt(1-s^2) times the
/// mollified surface integral with weight |x-a|^{k-n+2}, Gaussian delta of
/// width eps. Independent of the beam/section composition path.
template <int N>
double cone_direct_oracle(const VolumeSamples<N>& vs, const Vec<N>& a, const Vec<N>& beta,
                          double s, int k, double eps) {
    if (!(eps > 0)) throw std::invalid_argument("cone_direct_oracle: eps must be positive");
    const double cut = 10.0 * eps;
    const double inv_e2 = 1.0 / (2.0 * eps * eps);
    const double de_norm = 1.0 / (eps * std::sqrt(2.0 * std::numbers::pi));
    double acc = 0;
    for (std::size_t i = 0; i < vs.points.size(); ++i) {
        const Vec<N> d = vs.points[i] - a;
        const double r = norm(d);
        if (r < 1e-12) continue;
        const double z = dot(d, beta) - r * s;
        if (std::abs(z) > cut) continue;
        acc += vs.fvals[i] * std::exp(-z * z * inv_e2) * std::pow(r, double(k) - N + 2);
    }
    return std::sqrt(1.0 - s * s) * de_norm * acc * vs.cell_volume;
}

template <int N>
double cone_direct_oracle(const ScalarField<N>& field, const Vec<N>& a, const Vec<N>& beta,
                          double s, int k, double eps, int cells_per_axis = 128) {
    return cone_direct_oracle(make_volume_samples(field, cells_per_axis), a, beta, s, k, eps);
}

/// Forward sweep over a convex-geometry vertex lattice covering the bounding
/// box of A padded by `pad`. Deterministic ordering; every value is a fresh
/// cone_composed evaluation.
template <int N>
ConeData<N> forward_cone_convex(const ScalarField<N>& field, const ConvexVertexSet<N>& A, int k,
                                int vertices_per_axis, double pad, const SphereGrid<N>& beta,
                                int ns, double s_max, int circle_nodes = 64, int threads = 0) {
    ConeData<N> g;
    g.geometry = ConeData<N>::Geometry::convex;
    g.k = k;
    g.lattice_dims = N;
    g.beta = beta;
    g.ns = ns;
    g.s_max = s_max;
    for (int i = 0; i < N; ++i) {
        g.lat_origin[i] = A.center[i] - A.radii[i] - pad;
        g.lat_spacing[i] = 2.0 * (A.radii[i] + pad) / (vertices_per_axis - 1);
        g.lat_shape[i] = vertices_per_axis;
    }
    g.values.assign(static_cast<std::size_t>(g.vertex_count()) * beta.size() * ns, 0.0);
    parallel_for(g.vertex_count(), [&](std::int64_t vf) {
        const Vec<N> a = g.vertex(vf);
        for (int ib = 0; ib < beta.size(); ++ib)
            for (int is = 0; is < ns; ++is)
                g.at(vf, ib, is) = cone_composed(field, a, beta.nodes[ib], g.s(is), k, circle_nodes);
    }, threads);
    return g;
}

/// Forward sweep over a planar detector lattice (abar in [-a_max, a_max]^{n-1}).
template <int N>
ConeData<N> forward_cone_planar(const ScalarField<N>& field, int k, double a_max,
                                int vertices_per_axis, const SphereGrid<N>& beta, int ns,
                                double s_max, int circle_nodes = 64, int threads = 0) {
    ConeData<N> g;
    g.geometry = ConeData<N>::Geometry::planar;
    g.k = k;
    g.lattice_dims = N - 1;
    g.beta = beta;
    g.ns = ns;
    g.s_max = s_max;
    for (int i = 0; i < N - 1; ++i) {
        g.lat_origin[i] = -a_max;
        g.lat_spacing[i] = 2.0 * a_max / (vertices_per_axis - 1);
        g.lat_shape[i] = vertices_per_axis;
    }
    for (int i = N - 1; i < N; ++i) g.lat_shape[i] = 1;
    g.values.assign(static_cast<std::size_t>(g.vertex_count()) * beta.size() * ns, 0.0);
    parallel_for(g.vertex_count(), [&](std::int64_t vf) {
        const Vec<N> a = g.vertex(vf);  // x_n = 0
        for (int ib = 0; ib < beta.size(); ++ib)
            for (int is = 0; is < ns; ++is)
                g.at(vf, ib, is) = cone_composed(field, a, beta.nodes[ib], g.s(is), k, circle_nodes);
    }, threads);
    return g;
}

// ---------------------------------------------------------------------------
// Corruption injectors (for detection-power studies).
// ---------------------------------------------------------------------------

/// values *= 1 + amplitude * sin(frequency * a[axis]) per vertex.
template <int N>
void corrupt_multiplicative_sin(ConeData<N>& g, double amplitude, double frequency = 1.0,
                                int axis = 0) {
    for (std::int64_t vf = 0; vf < g.vertex_count(); ++vf) {
        const double factor = 1.0 + amplitude * std::sin(frequency * g.vertex(vf)[axis]);
        for (int ib = 0; ib < g.beta.size(); ++ib)
            for (int is = 0; is < g.ns; ++is) g.at(vf, ib, is) *= factor;
    }
}

template <int N>
void corrupt_multiplicative_sin(ProjectiveData<N>& pd, double amplitude, double frequency = 1.0,
                                int axis = 0) {
    for (std::int64_t af = 0; af < pd.a_count(); ++af) {
        const double factor = 1.0 + amplitude * std::sin(frequency * pd.abar(af)[axis]);
        for (std::int64_t pf = 0; pf < pd.p_count(); ++pf) pd.at(af, pf) *= factor;
    }
}

template <int N>
std::vector<double>& data_values(ConeData<N>& g) { return g.values; }
template <int N>
std::vector<double>& data_values(ProjectiveData<N>& pd) { return pd.w; }

/// Additive white noise scaled by the data sup; deterministic in the seed.
template <class Data>
void corrupt_additive_noise(Data& data, double amplitude, std::uint64_t seed) {
    double sup = 0;
    for (double v : data_values(data)) sup = std::max(sup, std::abs(v));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    for (double& v : data_values(data)) v += amplitude * sup * gauss(rng);
}

/// Circularly shifts every (vertex, beta) row along the s axis.
template <int N>
void corrupt_s_shift(ConeData<N>& g, int cells) {
    std::vector<double> row(g.ns);
    for (std::int64_t vf = 0; vf < g.vertex_count(); ++vf) {
        for (int ib = 0; ib < g.beta.size(); ++ib) {
            for (int is = 0; is < g.ns; ++is) row[is] = g.at(vf, ib, is);
            for (int is = 0; is < g.ns; ++is)
                g.at(vf, ib, is) = row[((is - cells) % g.ns + g.ns) % g.ns];
        }
    }
}

// ---------------------------------------------------------------------------
// Lattice interpolation of extracted beam data (order-6 separable Lagrange).
// ---------------------------------------------------------------------------

namespace detail {

inline void lagrange6_weights(double u, double w[6]) {
    // Nodes at integer offsets -2..3 around the base cell, local coord u in [0,1).
    static const double denom[6] = {-120, 24, -12, 12, -24, 120};
    const double x = u + 2.0;  // position relative to node 0
    double prod[7];
    prod[0] = 1.0;
    for (int i = 0; i < 6; ++i) prod[i + 1] = prod[i] * (x - i);
    double suffix = 1.0;
    for (int i = 5; i >= 0; --i) {
        w[i] = prod[i] * suffix / denom[i];
        suffix *= (x - i);
    }
}

}  // namespace detail

/// Separable order-6 Lagrange interpolation of values on an N-dim lattice.
template <int N>
class LatticeInterp {
  public:
    LatticeInterp(const GridSpec<N>& grid, std::vector<double> values)
        : grid_(grid), values_(std::move(values)) {
        for (int i = 0; i < N; ++i)
            if (grid_.shape[i] < 6) throw std::invalid_argument("LatticeInterp: lattice too small");
    }

    double eval(const Vec<N>& x) const {
        std::array<int, N> base{};
        std::array<std::array<double, 6>, N> w{};
        for (int i = 0; i < N; ++i) {
            const double f = (x[i] - grid_.origin[i]) / grid_.spacing[i];
            int b = static_cast<int>(std::floor(f));
            double u = f - b;
            // Clamp the 6-point window to the lattice.
            int start = b - 2;
            if (start < 0) {
                u += start;
                start = 0;
            }
            if (start > grid_.shape[i] - 6) {
                u += start - (grid_.shape[i] - 6);
                start = grid_.shape[i] - 6;
            }
            base[i] = start;
            detail::lagrange6_weights(u, w[i].data());
        }
        return gather(0, base, w, 0);
    }

    /// True when x (and a margin around it) is covered by the lattice.
    bool covers(const Vec<N>& x, double margin = 0.0) const {
        for (int i = 0; i < N; ++i) {
            const double lo = grid_.origin[i];
            const double hi = grid_.origin[i] + (grid_.shape[i] - 1) * grid_.spacing[i];
            if (x[i] < lo + margin || x[i] > hi - margin) return false;
        }
        return true;
    }

  private:
    double gather(int axis, std::array<int, N>& base,
                  const std::array<std::array<double, 6>, N>& w, std::int64_t offset) const {
        std::int64_t stride = 1;
        for (int i = axis + 1; i < N; ++i) stride *= grid_.shape[i];
        if (axis == N - 1) {
            double acc = 0;
            const std::int64_t start = offset + base[axis];
            for (int j = 0; j < 6; ++j) acc += w[axis][j] * values_[start + j];
            return acc;
        }
        double acc = 0;
        for (int j = 0; j < 6; ++j)
            acc += w[axis][j] * gather(axis + 1, base, w, offset + (base[axis] + j) * stride);
        return acc;
    }

    GridSpec<N> grid_;
    std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Shared per-vertex section-range residuals.
// ---------------------------------------------------------------------------

namespace detail {

/// Evenness and prefactored-PDE residuals of one (beta, s) slab; the sphere
/// transform is shared across vertices.
template <int N>
struct SstBatch {
    const SphereGrid<N>& beta;
    int ns;
    double s_max;
    std::optional<SphereTransform> st;
    std::vector<double> prefac;

    SstBatch(const SphereGrid<N>& b, int ns_, double smax_) : beta(b), ns(ns_), s_max(smax_) {
        if constexpr (N == 3) st.emplace(b);
        prefac.resize(ns);
        for (int is = 0; is < ns; ++is) {
            const double s = -s_max + is * (2.0 * s_max / (ns - 1));
            prefac[is] = std::pow(1.0 - s * s, (N - 2) / 2.0);
        }
    }
    double s(int is) const { return -s_max + is * (2.0 * s_max / (ns - 1)); }

    void residuals(const double* slab, double& evenness, double& pde) const {
        const int nb = beta.size();
        evenness = 0;
        for (int ib = 0; ib < nb; ++ib) {
            const int ia = beta.antipode(ib);
            for (int is = 0; is < ns; ++is)
                evenness = std::max(evenness,
                                    std::abs(slab[ia * ns + (ns - 1 - is)] - slab[ib * ns + is]));
        }
        const double ds = 2.0 * s_max / (ns - 1);
        std::vector<double> col(nb);
        std::vector<std::vector<double>> lap(ns);
        for (int is = 0; is < ns; ++is) {
            for (int ib = 0; ib < nb; ++ib) col[ib] = slab[ib * ns + is] / prefac[is];
            if constexpr (N == 2) {
                lap[is] = circle_laplacian(col);
            } else {
                lap[is] = st->laplacian(col);
            }
        }
        pde = 0;
        std::vector<double> row(ns);
        for (int ib = 0; ib < nb; ++ib) {
            for (int is = 0; is < ns; ++is) row[is] = slab[ib * ns + is] / prefac[is];
            for (int is = 3; is < ns - 3; ++is) {
                const double s_ = s(is);
                if (std::abs(s_) > 0.901) continue;
                const double val = (1.0 - s_ * s_) * fd7_d2(row.data(), is, ds) -
                                   (N - 1) * s_ * fd7_d1(row.data(), is, ds) - lap[is][ib];
                pde = std::max(pde, std::abs(prefac[is] * val));
            }
        }
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Range check, bounded convex vertex geometry.
// ---------------------------------------------------------------------------

struct CrtTolerances {
    double sst_evenness = 1e-8;
    double sst_pde = 1e-3;
    double boundary = 1e-3;
    double independence = 1e-3;
    double compact_support = 1e-3;
    double interior = 1e-3;  // used when the reference density is supplied
    double fd_step = 0.0;    // 0: 0.6 * lattice spacing (balances interpolation
                             // error against stencil truncation)
};

/// Per-vertex section-range conditions, then the transport conditions on the
/// endpoint-limit beam data: outflow boundary values, v-independence of the
/// (k+1)-st derivative, and its vanishing on a shell inside the boundary
/// (margin 0.1 diam, standing in for "some compact K").
template <int N>
ConsistencyReport check_crt_range(const ConeData<N>& g, const ConvexVertexSet<N>& A,
                                  const CrtTolerances& tol = {},
                                  const ScalarField<N>* f = nullptr, int threads = 0) {
    if (g.geometry != ConeData<N>::Geometry::convex)
        throw std::invalid_argument("check_crt_range: convex-geometry data required");
    if (!g.beta.antipodally_closed())
        throw std::invalid_argument("check_crt_range: beta grid not antipodally closed");
    const int k = g.k;
    if (k < 0 || k > 2) throw std::invalid_argument("check_crt_range: k out of range");

    ConsistencyReport report;
    const std::int64_t nv = g.vertex_count();
    const int nb = g.beta.size();

    // Per-vertex section conditions.
    const detail::SstBatch<N> batch(g.beta, g.ns, g.s_max);
    std::vector<double> ev(nv), pde(nv);
    parallel_for(nv, [&](std::int64_t vf) {
        batch.residuals(&g.values[vf * nb * g.ns], ev[vf], pde[vf]);
    }, threads);
    const double norm_g = std::max(1.0, g.sup_abs());
    report.add("crt_sst_evenness", *std::max_element(ev.begin(), ev.end()) / norm_g,
               tol.sst_evenness);
    report.add("crt_sst_pde", *std::max_element(pde.begin(), pde.end()) / norm_g, tol.sst_pde);

    // Endpoint limits u(a, beta) on the vertex lattice.
    std::vector<std::vector<double>> u(nb);  // per beta: lattice values
    for (int ib = 0; ib < nb; ++ib) u[ib].assign(nv, 0.0);
    bool finite = true;
    {
        std::vector<std::uint8_t> ok(nv, 1);
        parallel_for(nv, [&](std::int64_t vf) {
            SectionData<N> local;
            local.beta = g.beta;
            local.ns = g.ns;
            local.s_max = g.s_max;
            local.values.assign(g.values.begin() + vf * nb * g.ns,
                                g.values.begin() + (vf + 1) * nb * g.ns);
            for (int ib = 0; ib < nb; ++ib) {
                double lim = 0;
                try {
                    lim = sst_limit(local, ib);
                } catch (const std::domain_error&) {
                    ok[vf] = 0;
                }
                if (!std::isfinite(lim)) ok[vf] = 0;
                u[ib][vf] = lim;
            }
        }, threads);
        for (auto o : ok) finite = finite && o;
    }
    report.add("crt_limit_finite", finite ? 0.0 : 1.0, 0.5);

    double sup_u = 0;
    for (int ib = 0; ib < nb; ++ib)
        for (double v : u[ib]) sup_u = std::max(sup_u, std::abs(v));
    const double norm_u = std::max(1.0, sup_u);

    // Interpolants of u(., v) over the vertex lattice, for the direction
    // subset (which must be grid nodes: the data is all we have).
    GridSpec<N> lattice;
    lattice.origin = g.lat_origin;
    lattice.spacing = g.lat_spacing;
    lattice.shape = g.lat_shape;
    // Direction subset: the ideal well-separated set where the grid contains
    // it, otherwise a deterministic greedy max-min-distance pick of grid
    // nodes (the data only exists at grid directions).
    std::vector<int> dir_idx;
    for (const auto& d : independence_directions<N>()) {
        for (int ib = 0; ib < nb; ++ib)
            if (norm(g.beta.nodes[ib] - d) < 1e-9) {
                dir_idx.push_back(ib);
                break;
            }
    }
    if (dir_idx.size() < 8) {
        dir_idx.assign(1, 0);
        while (dir_idx.size() < 8) {
            int best = -1;
            double best_sep = -1;
            for (int ib = 0; ib < nb; ++ib) {
                double sep = std::numeric_limits<double>::infinity();
                for (int j : dir_idx) sep = std::min(sep, norm(g.beta.nodes[ib] - g.beta.nodes[j]));
                if (sep > best_sep) {
                    best_sep = sep;
                    best = ib;
                }
            }
            dir_idx.push_back(best);
        }
    }
    std::vector<LatticeInterp<N>> interp;
    interp.reserve(dir_idx.size());
    for (int idx : dir_idx) interp.emplace_back(lattice, u[idx]);

    const double tau = tol.fd_step > 0 ? tol.fd_step : 0.6 * g.lat_spacing[0];
    const double sign = (k + 1) % 2 == 0 ? 1.0 : -1.0;
    double kfact = 1;
    for (int j = 2; j <= k; ++j) kfact *= j;

    const auto deriv = [&](std::size_t di, const Vec<N>& a, int order) {
        const Vec<N>& v = g.beta.nodes[dir_idx[di]];
        const auto phi = [&](double t) { return interp[di].eval(ray_point(a, t, v)); };
        const double coarse = detail::central_fd(phi, order, tau);
        const double fine = detail::central_fd(phi, order, 0.5 * tau);
        return (4.0 * fine - coarse) / 3.0;
    };

    // Directional independence of (D_v)^{k+1} u, and the reference-density
    // comparison when f is supplied.
    double res_indep = 0, res_field = 0;
    const double reach = fd_stencil_reach(k + 1, tau);
    for (std::int64_t vf = 0; vf < nv; ++vf) {
        const Vec<N> a = g.vertex(vf);
        if (A.scaled_radius(a) > 0.85) continue;  // interior sample set
        double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin;
        bool usable = true;
        for (std::size_t di = 0; di < interp.size(); ++di) {
            const Vec<N>& v = g.beta.nodes[dir_idx[di]];
            if (!interp[di].covers(ray_point(a, reach, v)) ||
                !interp[di].covers(ray_point(a, -reach, v)))
                usable = false;
        }
        if (!usable) continue;
        for (std::size_t di = 0; di < interp.size(); ++di) {
            const double d = deriv(di, a, k + 1);
            dmin = std::min(dmin, d);
            dmax = std::max(dmax, d);
            if (f) res_field = std::max(res_field, std::abs(d - sign * kfact * f->eval(a)));
        }
        res_indep = std::max(res_indep, dmax - dmin);
    }
    report.add("crt_directional_independence", res_indep / norm_u, tol.independence);
    if (f) report.add("crt_interior_transport", res_field / norm_u, tol.interior);

    // Outflow boundary conditions via one-sided stencils stepping inward.
    double res_boundary[3] = {0, 0, 0};
    const int nbpts = 32;
    for (int b = 0; b < nbpts; ++b) {
        Vec<N> omega;
        if constexpr (N == 2) {
            const double th = 2.0 * std::numbers::pi * b / nbpts;
            omega = Vec<2>{std::cos(th), std::sin(th)};
        } else {
            const double z = -1.0 + 2.0 * (b + 0.5) / nbpts;
            const double th = 2.4 * b;
            const double rho = std::sqrt(1.0 - z * z);
            omega = Vec<3>{rho * std::cos(th), rho * std::sin(th), z};
        }
        const Vec<N> a = A.boundary_point(omega);
        const Vec<N> n = A.unit_normal(a);
        for (std::size_t di = 0; di < interp.size(); ++di) {
            const Vec<N>& v = g.beta.nodes[dir_idx[di]];
            if (dot(v, n) <= 1e-8) continue;
            if (exit_time(A, a, -v) < 3.0 * tau + 1e-12) continue;
            const auto u_at = [&](double t) { return interp[di].eval(ray_point(a, t, v)); };
            for (int j = 0; j <= k; ++j)
                res_boundary[j] =
                    std::max(res_boundary[j], std::abs(one_sided_derivative(u_at, j, tau)));
        }
    }
    for (int j = 0; j <= k; ++j)
        report.add("crt_boundary_j" + std::to_string(j), res_boundary[j] / norm_u, tol.boundary);

    // Compact support: (D_v)^{k+1} u vanishes on the shell between the
    // declared K and the boundary.
    const double margin = 0.1 * A.diameter();
    const double rmin = *std::min_element(A.radii.c.begin(), A.radii.c.end());
    double res_shell = 0;
    for (std::int64_t vf = 0; vf < nv; ++vf) {
        const Vec<N> a = g.vertex(vf);
        const double sr = A.scaled_radius(a);
        // Shell in scaled radius: within the set, outside K.
        if (sr >= 1.0 || sr < 1.0 - margin / rmin) continue;
        for (std::size_t di = 0; di < interp.size(); ++di) {
            const Vec<N>& v = g.beta.nodes[dir_idx[di]];
            if (!interp[di].covers(ray_point(a, reach, v)) ||
                !interp[di].covers(ray_point(a, -reach, v)))
                continue;
            res_shell = std::max(res_shell, std::abs(deriv(di, a, k + 1)));
        }
    }
    report.add("crt_compact_support", res_shell / norm_u, tol.compact_support);
    return report;
}

// ---------------------------------------------------------------------------
// Reconstruction from convex-geometry cone data.
// ---------------------------------------------------------------------------

/// f(a) = ((-1)^{k+1}/k!) (D_v)^{k+1} u(a, v) with u extracted per vertex by
/// the endpoint limit. For axis-aligned v the stencils land exactly on
/// lattice vertices (tau = 2 spacing with one Richardson level at 1 spacing);
/// other v fall back to lattice interpolation. Nodes whose stencil leaves the
/// lattice or the set closure are flagged invalid.
template <int N>
GridField<N> reconstruct_from_crt(const ConeData<N>& g, const ConvexVertexSet<N>& A,
                                  std::optional<Vec<N>> v_opt = {}, int threads = 0) {
    if (g.geometry != ConeData<N>::Geometry::convex)
        throw std::invalid_argument("reconstruct_from_crt: convex-geometry data required");
    const int k = g.k;
    const Vec<N> v = v_opt.value_or(axis_unit<N>(0));
    const int nb = g.beta.size();
    int vidx = -1;
    for (int ib = 0; ib < nb; ++ib)
        if (norm(g.beta.nodes[ib] - v) < 1e-9) vidx = ib;
    if (vidx < 0) throw std::invalid_argument("reconstruct_from_crt: v is not a beta grid node");

    const std::int64_t nv = g.vertex_count();
    std::vector<double> u(nv);
    parallel_for(nv, [&](std::int64_t vf) {
        SectionData<N> local;
        local.beta = g.beta;
        local.ns = g.ns;
        local.s_max = g.s_max;
        local.values.assign(g.values.begin() + vf * nb * g.ns,
                            g.values.begin() + (vf + 1) * nb * g.ns);
        u[vf] = sst_limit(local, vidx);
    }, threads);

    GridSpec<N> lattice;
    lattice.origin = g.lat_origin;
    lattice.spacing = g.lat_spacing;
    lattice.shape = g.lat_shape;

    // Axis alignment test: v = +/- e_axis.
    int axis = -1;
    double axis_sign = 1;
    for (int i = 0; i < N; ++i) {
        if (std::abs(std::abs(v[i]) - 1.0) < 1e-12) {
            axis = i;
            axis_sign = v[i] > 0 ? 1.0 : -1.0;
        }
    }

    const double sign = (k + 1) % 2 == 0 ? 1.0 : -1.0;
    double kfact = 1;
    for (int j = 2; j <= k; ++j) kfact *= j;
    const double tau = 2.0 * lattice.spacing[axis >= 0 ? axis : 0];
    const double reach = fd_stencil_reach(k + 1, tau);

    GridField<N> out(lattice);
    std::optional<LatticeInterp<N>> interp;
    if (axis < 0) interp.emplace(lattice, u);

    parallel_for(lattice.size(), [&](std::int64_t fidx) {
        const auto idx = lattice.unflat(fidx);
        const Vec<N> a = lattice.node(idx);
        if (!A.contains(a)) {
            out.valid[fidx] = 0;
            return;
        }
        const int cells = 2 * ((k + 1) >= 3 ? 2 : 1);  // lattice cells per side
        if (axis >= 0) {
            if (idx[axis] - cells < 0 || idx[axis] + cells >= lattice.shape[axis]) {
                out.valid[fidx] = 0;
                return;
            }
            std::int64_t stride = 1;
            for (int i = axis + 1; i < N; ++i) stride *= lattice.shape[i];
            const auto phi = [&](double t) {
                // t is a multiple of spacing/1 here by construction.
                const int off = static_cast<int>(std::llround(axis_sign * t / lattice.spacing[axis]));
                return u[fidx + off * stride];
            };
            const double coarse = detail::central_fd(phi, k + 1, tau);
            const double fine = detail::central_fd(phi, k + 1, 0.5 * tau);
            out.values[fidx] = sign / kfact * (4.0 * fine - coarse) / 3.0;
        } else {
            if (!interp->covers(ray_point(a, reach, v)) || !interp->covers(ray_point(a, -reach, v))) {
                out.valid[fidx] = 0;
                return;
            }
            const auto phi = [&](double t) { return interp->eval(ray_point(a, t, v)); };
            const double coarse = detail::central_fd(phi, k + 1, tau);
            const double fine = detail::central_fd(phi, k + 1, 0.5 * tau);
            out.values[fidx] = sign / kfact * (4.0 * fine - coarse) / 3.0;
        }
    }, threads);
    return out;
}

// ---------------------------------------------------------------------------
// Range check, planar detector geometry (Compton).
// ---------------------------------------------------------------------------

struct ComptonTolerances {
    double sst_evenness = 1e-8;
    double sst_pde = 1e-3;
    double lower_hemisphere = 1e-4;
    double w_support_leak = 1e-5;  // interpolation noise floor of extracted w
    double factorization = 1e-4;
    double moments = 1e-4;
    double h_support = 1e-4;
    int moment_max_degree = 4;
};

/// Conditions: per-detector-position section range (evenness, PDE), endpoint
/// limit with vanishing lower hemisphere, then the projective-data conditions
/// (compact support, factorization, moments; h support when a row source for
/// off-grid sampling is available).
template <int N>
ConsistencyReport check_compton_range(const ConeData<N>& g, const ComptonTolerances& tol = {},
                                      const WRowSource<N - 1>* row_source = nullptr,
                                      double p_max = 4.0, int np = 256, double sigma_max = 64.0,
                                      int nsig = 512, const SupportCone* cone = nullptr,
                                      int threads = 0) {
    constexpr int M = N - 1;
    if (g.geometry != ConeData<N>::Geometry::planar)
        throw std::invalid_argument("check_compton_range: planar-geometry data required");
    if (!g.beta.antipodally_closed())
        throw std::invalid_argument("check_compton_range: beta grid not antipodally closed");

    ConsistencyReport report;
    const std::int64_t nv = g.vertex_count();
    const int nb = g.beta.size();

    const detail::SstBatch<N> batch(g.beta, g.ns, g.s_max);
    std::vector<double> ev(nv), pde(nv);
    parallel_for(nv, [&](std::int64_t vf) {
        batch.residuals(&g.values[vf * nb * g.ns], ev[vf], pde[vf]);
    }, threads);
    const double norm_g = std::max(1.0, g.sup_abs());
    report.add("compton_sst_evenness", *std::max_element(ev.begin(), ev.end()) / norm_g,
               tol.sst_evenness);
    report.add("compton_sst_pde", *std::max_element(pde.begin(), pde.end()) / norm_g,
               tol.sst_pde);

    // Endpoint limits u(abar, v) for every beta node.
    std::vector<std::vector<double>> u(nv);  // per vertex: values over beta
    bool finite = true;
    parallel_for(nv, [&](std::int64_t vf) {
        SectionData<N> local;
        local.beta = g.beta;
        local.ns = g.ns;
        local.s_max = g.s_max;
        local.values.assign(g.values.begin() + vf * nb * g.ns,
                            g.values.begin() + (vf + 1) * nb * g.ns);
        u[vf].resize(nb);
        for (int ib = 0; ib < nb; ++ib) u[vf][ib] = sst_limit(local, ib);
    }, threads);
    double sup_u = 0;
    for (const auto& row : u)
        for (double v : row) {
            if (!std::isfinite(v)) finite = false;
            sup_u = std::max(sup_u, std::abs(v));
        }
    report.add("compton_limit_finite", finite ? 0.0 : 1.0, 0.5);
    const double norm_u = std::max(1.0, sup_u);

    // Lower hemisphere: u(abar, v) = 0 whenever v_n <= 0.
    double res_lower = 0;
    for (std::int64_t vf = 0; vf < nv; ++vf)
        for (int ib = 0; ib < nb; ++ib)
            if (g.beta.nodes[ib][N - 1] <= 0.0)
                res_lower = std::max(res_lower, std::abs(u[vf][ib]));
    report.add("compton_lower_hemisphere", res_lower / norm_u, tol.lower_hemisphere);

    // Projective data w(abar, p) = v_n^{k+1} u(abar, v(p)) from the upper
    // hemisphere, interpolating u over directions.
    ProjectiveData<N> pd;
    pd.k = g.k;
    pd.a_max = -g.lat_origin[0];
    pd.na = g.lat_shape[0];
    pd.p_max = p_max;
    pd.np = np;
    pd.w.assign(static_cast<std::size_t>(pd.a_count() * pd.p_count()), 0.0);
    parallel_for(nv, [&](std::int64_t vf) {
        const SphereFunction<N> uf = SphereFunction<N>::from_samples(g.beta, u[vf]);
        for (std::int64_t pf = 0; pf < pd.p_count(); ++pf) {
            const Vec<M> p = pd.pbar(pf);
            Vec<N> dir;
            for (int i = 0; i < M; ++i) dir[i] = p[i];
            dir[N - 1] = 1.0;
            const double vn = 1.0 / norm(dir);
            pd.at(vf, pf) = std::pow(vn, g.k + 1) * uf.eval(vn * dir);
        }
    }, threads);

    report.add("compton_w_support_leak", support_leak_ratio(pd), tol.w_support_leak);
    const auto sw = fourier_w(pd);
    check_factorization(sw, report, tol.factorization);
    {
        std::vector<Vec<M>> dirs;
        dirs.push_back(axis_unit<M>(0));
        if constexpr (M >= 2) {
            dirs.push_back(axis_unit<M>(1));
            dirs.push_back(normalized(Vec<2>{1.0, 1.0}));
        }
        check_moment_condition(pd, tol.moment_max_degree, dirs, report, tol.moments);
    }
    if (row_source) {
        const auto sh = build_h<N>(*row_source, p_max, np, sigma_max, nsig, g.k, threads);
        const SupportCone c = cone ? *cone : estimate_support_cone(sh);
        check_h_support(sh, c, report, tol.h_support);
    } else {
        report.add_informational("h_support", 0.0, "skipped: no off-grid row source");
    }
    // Rename entries with the geometry prefix for the aggregated report.
    for (auto& e : report.entries)
        if (e.name.rfind("compton_", 0) != 0 && e.name.rfind("samples_", 0) != 0)
            e.name = "compton_" + e.name;
    return report;
}

}  // namespace conetomo
