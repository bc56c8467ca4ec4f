#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "conetomo/vec.hpp"

namespace conetomo {

/// Uniform axis-aligned lattice: node(i) = origin + i * spacing per axis.
template <int N>
struct GridSpec {
    Vec<N> origin{};
    Vec<N> spacing{};
    std::array<int, N> shape{};

    std::int64_t size() const {
        std::int64_t n = 1;
        for (int i = 0; i < N; ++i) n *= shape[i];
        return n;
    }
    Vec<N> node(const std::array<int, N>& idx) const {
        Vec<N> p;
        for (int i = 0; i < N; ++i) p[i] = origin[i] + idx[i] * spacing[i];
        return p;
    }
    std::int64_t flat(const std::array<int, N>& idx) const {  // row-major
        std::int64_t f = 0;
        for (int i = 0; i < N; ++i) f = f * shape[i] + idx[i];
        return f;
    }
    std::array<int, N> unflat(std::int64_t f) const {
        std::array<int, N> idx{};
        for (int i = N - 1; i >= 0; --i) {
            idx[i] = static_cast<int>(f % shape[i]);
            f /= shape[i];
        }
        return idx;
    }

    static GridSpec centered_box(const Vec<N>& lo, const Vec<N>& hi, int nodes_per_axis) {
        if (nodes_per_axis < 2) throw std::invalid_argument("GridSpec: need >= 2 nodes per axis");
        GridSpec g;
        for (int i = 0; i < N; ++i) {
            g.origin[i] = lo[i];
            g.spacing[i] = (hi[i] - lo[i]) / (nodes_per_axis - 1);
            g.shape[i] = nodes_per_axis;
        }
        return g;
    }
};

/// Dense gridded scalar field with a validity mask (nodes a stencil could not
/// reach are flagged instead of silently filled).
template <int N>
struct GridField {
    GridSpec<N> grid;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;

    explicit GridField(const GridSpec<N>& g = {})
        : grid(g),
          values(static_cast<std::size_t>(g.size()), 0.0),
          valid(static_cast<std::size_t>(g.size()), 1) {}

    double& at(const std::array<int, N>& idx) { return values[grid.flat(idx)]; }

    std::int64_t valid_count() const {
        std::int64_t n = 0;
        for (auto v : valid) n += v;
        return n;
    }

    /// Relative L2 difference against a reference function over valid nodes.
    double rel_l2_error(const std::function<double(const Vec<N>&)>& ref) const {
        double num = 0, den = 0;
        for (std::int64_t f = 0; f < grid.size(); ++f) {
            if (!valid[f]) continue;
            const double r = ref(grid.node(grid.unflat(f)));
            const double d = values[f] - r;
            num += d * d;
            den += r * r;
        }
        if (den == 0.0) return std::sqrt(num) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        return std::sqrt(num / den);
    }

    /// Relative L2 difference against another field on the same grid,
    /// normalized by this field's norm; only nodes valid in both count.
    double rel_l2_diff(const GridField& other) const {
        double num = 0, den = 0;
        for (std::size_t f = 0; f < values.size(); ++f) {
            if (!valid[f] || !other.valid[f]) continue;
            const double d = values[f] - other.values[f];
            num += d * d;
            den += values[f] * values[f];
        }
        if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        return std::sqrt(num / den);
    }

    double sup_error(const std::function<double(const Vec<N>&)>& ref) const {
        double m = 0;
        for (std::int64_t f = 0; f < grid.size(); ++f) {
            if (!valid[f]) continue;
            m = std::max(m, std::abs(values[f] - ref(grid.node(grid.unflat(f)))));
        }
        return m;
    }
};

}  // namespace conetomo
