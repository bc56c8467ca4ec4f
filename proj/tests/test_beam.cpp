#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "conetomo/beam.hpp"

using namespace conetomo;

namespace {

// Independent oracle: dense midpoint rule over the clipped ray span.
template <int N>
double beam_oracle(const ScalarField<N>& f, const Vec<N>& a, const Vec<N>& v, int k,
                   int samples = 100000) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (const auto& t : f.terms) {
        const Vec<N> d = a - t.center;
        const double b = dot(d, v), c = norm2(d) - t.radius * t.radius;
        const double disc = b * b - c;
        if (disc <= 0) continue;
        const double s = std::sqrt(disc);
        if (-b + s <= 0) continue;
        lo = std::min(lo, std::max(0.0, -b - s));
        hi = std::max(hi, -b + s);
    }
    if (!(hi > 0) || !std::isfinite(lo)) return 0.0;
    const double dr = (hi - lo) / samples;
    double acc = 0;
    for (int i = 0; i < samples; ++i) {
        const double r = lo + (i + 0.5) * dr;
        acc += f.eval(ray_point(a, r, v)) * std::pow(r, k);
    }
    return acc * dr;
}

ScalarField<2> two_bump_field() {
    return make_sum<2>({make_bump<2>(Vec<2>{0.2, -0.1}, 0.45, 1.0),
                        make_bump<2>(Vec<2>{-0.3, 0.25}, 0.3, 0.6)});
}

}  // namespace

TEST_CASE("beam transform is exactly zero off the support") {
    const auto f = two_bump_field();
    REQUIRE(divergent_beam(f, Vec<2>{2.0, 2.0}, Vec<2>{1.0, 0.0}, 0) == 0.0);
    REQUIRE(divergent_beam(f, Vec<2>{0.0, -2.0}, Vec<2>{0.0, -1.0}, 1) == 0.0);
}

TEST_CASE("beam transform of a radial bump is direction independent") {
    const Vec<3> c{0.1, -0.2, 0.3};
    const auto f = make_bump<3>(c, 0.5, 2.0);
    const double ref = divergent_beam(f, c, Vec<3>{1, 0, 0}, 1);
    const auto grid = sphere_grid<3>(6);
    for (int i = 0; i < grid.size(); i += 5) {
        const double val = divergent_beam(f, c, grid.nodes[i], 1);
        REQUIRE(std::abs(val - ref) < 1e-12 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("beam transform agrees with the dense midpoint oracle") {
    const auto f = two_bump_field();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    int checked = 0;
    for (int trial = 0; trial < 90; ++trial) {
        const Vec<2> a{uni(rng), uni(rng)};
        const double th = std::numbers::pi * uni(rng);
        const Vec<2> v{std::cos(th), std::sin(th)};
        const int k = trial % 3;
        const double got = divergent_beam(f, a, v, k);
        const double ref = beam_oracle(f, a, v, k);
        if (ref == 0.0) {
            REQUIRE(got == 0.0);
            continue;
        }
        REQUIRE(std::abs(got - ref) < 1e-8 * std::abs(ref));
        ++checked;
    }
    REQUIRE(checked >= 20);
}

TEST_CASE("beam transform is homogeneous in the field") {
    const auto f = two_bump_field();
    const Vec<2> a{-0.8, 0.1};
    const Vec<2> v = normalized(Vec<2>{1.0, 0.2});
    const double base = divergent_beam(f, a, v, 1);
    const double scaled = divergent_beam(scale(f, -2.5), a, v, 1);
    REQUIRE(scaled == Catch::Approx(-2.5 * base).epsilon(1e-14));
}

TEST_CASE("outflow rays give exactly zero for supported fields") {
    const auto A = ConvexVertexSet<2>::unit_ball();
    const auto f = make_bump<2>(Vec<2>{0, 0}, 0.6, 1.0);
    const auto grid = sphere_grid<2>(8);
    for (int b = 0; b < grid.size(); ++b) {
        const Vec<2> a = A.boundary_point(grid.nodes[b]);
        for (const auto& v : grid.nodes)
            if (dot(v, A.unit_normal(a)) > 0) REQUIRE(divergent_beam(f, a, v, 2) == 0.0);
    }
}

TEST_CASE("directional derivative on synthetic linear data") {
    BeamData<2> u;
    u.k = 0;
    u.eval = [](const Vec<2>& a, const Vec<2>& v) { return dot(a, v); };
    const Vec<2> a{0.3, -0.2};
    const Vec<2> v = normalized(Vec<2>{2.0, 1.0});
    REQUIRE(directional_derivative(u, a, v, 1, 0.1) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(directional_derivative(u, a, v, 2, 0.1) == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("directional derivative respects the declared domain") {
    BeamData<2> u;
    u.eval = [](const Vec<2>& a, const Vec<2>&) { return a[0]; };
    u.in_domain = [](const Vec<2>& a) { return std::abs(a[0]) < 1.0; };
    const Vec<2> v{1.0, 0.0};
    REQUIRE_NOTHROW(directional_derivative(u, Vec<2>{0.0, 0.0}, v, 1, 0.1));
    REQUIRE_THROWS_AS(directional_derivative(u, Vec<2>{0.95, 0.0}, v, 1, 0.1),
                      std::domain_error);
}

TEST_CASE("richardson halving gains at least a factor 8 on smooth data") {
    BeamData<2> u;
    u.eval = [](const Vec<2>& a, const Vec<2>& v) { return std::sin(dot(a, v) + 0.3); };
    const Vec<2> a{0.2, 0.4};
    const Vec<2> v = normalized(Vec<2>{1.0, -1.0});
    const double s = dot(a, v) + 0.3;
    const double exact[4] = {0.0, std::cos(s), -std::sin(s), -std::cos(s)};
    for (int j = 1; j <= 3; ++j) {
        const double e1 = std::abs(directional_derivative(u, a, v, j, 0.4) - exact[j]);
        const double e2 = std::abs(directional_derivative(u, a, v, j, 0.2) - exact[j]);
        REQUIRE(e2 * 8.0 <= e1 * 1.05);
    }
}

TEST_CASE("transport recursion: D_v R^k f = -k R^{k-1} f at interior points") {
    const auto f = make_bump<2>(Vec<2>{0.1, 0.0}, 0.6, 1.0);
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> uni(-0.55, 0.55);
    for (int k : {1, 2}) {
        const auto uk = beam_from_field(f, k);
        double scale_ref = 0, worst = 0;
        for (int trial = 0; trial < 30; ++trial) {
            const Vec<2> a{0.1 + uni(rng), uni(rng)};
            const double th = std::numbers::pi * uni(rng);
            const Vec<2> v{std::cos(th), std::sin(th)};
            const double lhs = directional_derivative(uk, a, v, 1, 0.002);
            const double rhs = -double(k) * divergent_beam(f, a, v, k - 1);
            worst = std::max(worst, std::abs(lhs - rhs));
            scale_ref = std::max(scale_ref, std::abs(rhs));
        }
        REQUIRE(scale_ref > 0);
        REQUIRE(worst <= 1e-6 * std::max(1.0, scale_ref));
    }
}

TEST_CASE("transport BVP check: forward data passes, constants fail") {
    const auto A = ConvexVertexSet<2>::unit_ball();
    const auto f = make_bump<2>(Vec<2>{0.0, 0.05}, 0.62, 1.0);

    for (int k : {0, 1}) {
        const auto u = beam_from_field(f, k);
        const auto report = check_transport_bvp(u, A, k, &f);
        INFO(report.to_csv());
        REQUIRE(report.overall_pass());
    }

    BeamData<2> ones;
    ones.k = 0;
    ones.eval = [](const Vec<2>&, const Vec<2>&) { return 1.0; };
    const auto bad = check_transport_bvp(ones, A, 0);
    const auto* j0 = bad.find("boundary_j0");
    REQUIRE(j0 != nullptr);
    REQUIRE(j0->residual == Catch::Approx(1.0).margin(1e-12));
    REQUIRE_FALSE(j0->pass);

    BeamData<2> zeros;
    zeros.k = 0;
    zeros.eval = [](const Vec<2>&, const Vec<2>&) { return 0.0; };
    const auto ok = check_transport_bvp(zeros, A, 2);
    for (const auto& e : ok.entries)
        if (e.note.empty()) REQUIRE(e.residual == 0.0);
    REQUIRE(ok.overall_pass());
}

TEST_CASE("reconstruction from beam data") {
    const auto A = ConvexVertexSet<2>::unit_ball();
    const auto f = make_bump<2>(Vec<2>{0.0, 0.05}, 0.62, 1.0);
    const auto ref = [&](const Vec<2>& x) { return f.eval(x); };

    const auto grid = GridSpec<2>::centered_box(Vec<2>{-0.8, -0.8}, Vec<2>{0.8, 0.8}, 33);

    // Zero data reconstructs to the zero grid.
    BeamData<2> zeros;
    zeros.k = 1;
    zeros.eval = [](const Vec<2>&, const Vec<2>&) { return 0.0; };
    const auto z = reconstruct_from_beam(zeros, A, 1, Vec<2>{1.0, 0.0}, grid);
    for (std::size_t i = 0; i < z.values.size(); ++i)
        if (z.valid[i]) REQUIRE(z.values[i] == 0.0);

    for (int k : {0, 1}) {
        const auto u = beam_from_field(f, k);
        const double tau = k == 0 ? 0.01 : 0.02;
        const auto r1 = reconstruct_from_beam(u, A, k, Vec<2>{1.0, 0.0}, grid, tau);
        const auto r2 = reconstruct_from_beam(u, A, k, Vec<2>{0.0, 1.0}, grid, tau);
        REQUIRE(r1.valid_count() > 500);
        REQUIRE(r1.rel_l2_error(ref) < 1e-2);
        REQUIRE(r2.rel_l2_error(ref) < 1e-2);
        REQUIRE(r1.rel_l2_diff(r2) < 1e-2);
    }
}
