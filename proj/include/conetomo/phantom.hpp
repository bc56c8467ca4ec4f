#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "conetomo/vec.hpp"

namespace conetomo {

/// One smooth bump: amplitude * exp(1 - 1/(1 - rho^2)) for rho = |x-c|/radius < 1,
/// zero outside the closed ball. C-infinity with support exactly B(center, radius).
template <int N>
struct BumpTerm {
    Vec<N> center;
    double radius = 1.0;
    double amplitude = 1.0;

    double eval(const Vec<N>& x) const {
        const double r2 = norm2(x - center) / (radius * radius);
        if (r2 >= 1.0) return 0.0;
        return amplitude * std::exp(1.0 - 1.0 / (1.0 - r2));
    }
};

/// Finite sum of bumps. Immutable after construction; evaluation is pure.
template <int N>
struct ScalarField {
    std::vector<BumpTerm<N>> terms;

    double eval(const Vec<N>& x) const {
        double s = 0;
        for (const auto& t : terms) s += t.eval(x);
        return s;
    }

    bool empty() const { return terms.empty(); }

    /// Largest bump amplitude magnitude; 0 for the empty field.
    double amplitude_scale() const {
        double s = 0;
        for (const auto& t : terms) s = std::max(s, std::abs(t.amplitude));
        return s;
    }

    /// Axis-aligned hull of all term balls. Zero box for the empty field.
    void bounding_box(Vec<N>& lo, Vec<N>& hi) const {
        for (int i = 0; i < N; ++i) {
            lo[i] = std::numeric_limits<double>::infinity();
            hi[i] = -std::numeric_limits<double>::infinity();
        }
        for (const auto& t : terms) {
            for (int i = 0; i < N; ++i) {
                lo[i] = std::min(lo[i], t.center[i] - t.radius);
                hi[i] = std::max(hi[i], t.center[i] + t.radius);
            }
        }
        if (terms.empty()) {
            for (int i = 0; i < N; ++i) lo[i] = hi[i] = 0.0;
        }
    }
};

/// Support extents used by the planar-detector checks: the transverse radius
/// R_f = max |x_bar| over the support and the slab [xn_min, xn_max] in the
/// last coordinate. Valid planar phantoms have xn_min > 0.
struct SupportBox {
    double xbar_radius = 0;
    double xn_min = 0;
    double xn_max = 0;

    double m0() const { return 1.0 / xn_max; }
    double M0() const { return 1.0 / xn_min; }
    double cone_slope() const { return xbar_radius; }
};

template <int N>
ScalarField<N> make_bump(const Vec<N>& center, double radius, double amplitude) {
    if (!(radius > 0.0)) throw std::invalid_argument("make_bump: radius must be positive");
    ScalarField<N> f;
    f.terms.push_back(BumpTerm<N>{center, radius, amplitude});
    return f;
}

template <int N>
ScalarField<N> make_sum(const std::vector<ScalarField<N>>& fields) {
    ScalarField<N> out;
    for (const auto& f : fields)
        out.terms.insert(out.terms.end(), f.terms.begin(), f.terms.end());
    return out;
}

template <int N>
ScalarField<N> negate(ScalarField<N> f) {
    for (auto& t : f.terms) t.amplitude = -t.amplitude;
    return f;
}

template <int N>
ScalarField<N> scale(ScalarField<N> f, double c) {
    for (auto& t : f.terms) t.amplitude *= c;
    return f;
}

/// Hull of the terms in planar coordinates x = (x_bar, x_n).
/// Throws when a term ball meets the half-space {x_n <= 0}, which the
/// planar-detector geometry forbids.
template <int N>
SupportBox support_box(const ScalarField<N>& field) {
    static_assert(N >= 2);
    if (field.terms.empty()) throw std::invalid_argument("support_box: empty field");
    SupportBox box;
    box.xn_min = std::numeric_limits<double>::infinity();
    for (const auto& t : field.terms) {
        if (t.center[N - 1] - t.radius <= 0.0)
            throw std::domain_error("support_box: term ball meets {x_n <= 0}");
        double cb2 = 0;
        for (int i = 0; i < N - 1; ++i) cb2 += t.center[i] * t.center[i];
        box.xbar_radius = std::max(box.xbar_radius, std::sqrt(cb2) + t.radius);
        box.xn_min = std::min(box.xn_min, t.center[N - 1] - t.radius);
        box.xn_max = std::max(box.xn_max, t.center[N - 1] + t.radius);
    }
    return box;
}

}  // namespace conetomo
