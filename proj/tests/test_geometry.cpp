#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "conetomo/geometry.hpp"

using namespace conetomo;

TEST_CASE("exit time on the unit ball") {
    const auto A = ConvexVertexSet<2>::unit_ball();
    REQUIRE(exit_time(A, Vec<2>{0, 0}, Vec<2>{1, 0}) == Catch::Approx(1.0));
    REQUIRE(exit_time(A, Vec<2>{0, 0}, Vec<2>{0, -1}) == Catch::Approx(1.0));
    REQUIRE(exit_time(A, Vec<2>{0.5, 0}, Vec<2>{1, 0}) == Catch::Approx(0.5));
    REQUIRE(exit_time(A, Vec<2>{1, 0}, Vec<2>{1, 0}) == 0.0);
    REQUIRE_THROWS_AS(exit_time(A, Vec<2>{1.5, 0}, Vec<2>{1, 0}), std::domain_error);
}

TEST_CASE("exit time on an ellipsoid is the exact quadric root") {
    const auto A = ConvexVertexSet<3>::ellipsoid(Vec<3>{1, 0, -1}, Vec<3>{2, 1, 0.5});
    // From the center along each axis the exit time is the semi-axis.
    REQUIRE(exit_time(A, Vec<3>{1, 0, -1}, Vec<3>{1, 0, 0}) == Catch::Approx(2.0));
    REQUIRE(exit_time(A, Vec<3>{1, 0, -1}, Vec<3>{0, 1, 0}) == Catch::Approx(1.0));
    REQUIRE(exit_time(A, Vec<3>{1, 0, -1}, Vec<3>{0, 0, 1}) == Catch::Approx(0.5));
}

TEST_CASE("semigroup property of the exit time") {
    const auto A = ConvexVertexSet<2>::ellipsoid(Vec<2>{0.2, -0.1}, Vec<2>{1.5, 0.8});
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        Vec<2> a{0.2 + 1.5 * 0.9 * uni(rng), -0.1 + 0.8 * 0.9 * uni(rng)};
        if (!A.contains(a)) continue;
        const double th = std::numbers::pi * uni(rng);
        const Vec<2> v{std::cos(th), std::sin(th)};
        const double tau = exit_time(A, a, v);
        const double t0 = 0.37 * tau;
        const double rest = exit_time(A, ray_point(a, t0, v), v);
        REQUIRE(std::abs(tau - (t0 + rest)) < 1e-10);
    }
}

TEST_CASE("outflow predicate on the unit ball") {
    const auto A = ConvexVertexSet<2>::unit_ball();
    REQUIRE(is_outflow(A, Vec<2>{1, 0}, Vec<2>{1, 0}));
    REQUIRE_FALSE(is_outflow(A, Vec<2>{1, 0}, Vec<2>{0, 1}));
    REQUIRE_FALSE(is_outflow(A, Vec<2>{1, 0}, Vec<2>{-1, 0}));
    REQUIRE_THROWS_AS(is_outflow(A, Vec<2>{0.5, 0}, Vec<2>{1, 0}), std::domain_error);
}

TEST_CASE("outflow points have zero exit time") {
    const auto A = ConvexVertexSet<3>::ball(Vec<3>{0, 0, 0}, 1.3);
    const auto grid = sphere_grid<3>(8);
    for (int i = 0; i < grid.size(); i += 7) {
        const Vec<3> a = A.boundary_point(grid.nodes[i]);
        for (int j = 0; j < grid.size(); j += 11) {
            const Vec<3>& v = grid.nodes[j];
            if (is_outflow(A, a, v)) REQUIRE(exit_time(A, a, v) <= 1e-9);
        }
    }
}

TEST_CASE("sphere grid weights sum to the sphere area") {
    const auto g2 = sphere_grid<2>(16);
    double s2 = 0;
    for (double w : g2.weights) s2 += w;
    REQUIRE(s2 == Catch::Approx(2.0 * std::numbers::pi).epsilon(1e-13));

    const auto g3 = sphere_grid<3>(12);
    double s3 = 0;
    for (double w : g3.weights) s3 += w;
    REQUIRE(s3 == Catch::Approx(4.0 * std::numbers::pi).epsilon(1e-13));
}

TEST_CASE("sphere grid nodes are unit and antipodally closed") {
    const auto g2 = sphere_grid<2>(8);
    const auto g3 = sphere_grid<3>(8);
    for (const auto& v : g2.nodes) REQUIRE(std::abs(norm(v) - 1.0) < 1e-14);
    for (const auto& v : g3.nodes) REQUIRE(std::abs(norm(v) - 1.0) < 1e-14);
    REQUIRE(g2.antipodally_closed());
    REQUIRE(g3.antipodally_closed());
}

TEST_CASE("degree-2 moment on S^2: integral of (v.e)^2 is 4 pi / 3") {
    const auto g = sphere_grid<3>(8);
    const Vec<3> e = normalized(Vec<3>{1.0, -2.0, 0.5});
    double acc = 0;
    for (int i = 0; i < g.size(); ++i) {
        const double d = dot(g.nodes[i], e);
        acc += g.weights[i] * d * d;
    }
    REQUIRE(std::abs(acc - 4.0 * std::numbers::pi / 3.0) < 1e-12);
}

TEST_CASE("sphere grid integrates low-degree polynomials to closed form") {
    // v_x^2 v_z^2 over S^2: 4 pi / 15. Degree 4 <= L-1 for L = 8.
    const auto g = sphere_grid<3>(8);
    double acc = 0;
    for (int i = 0; i < g.size(); ++i) {
        const auto& v = g.nodes[i];
        acc += g.weights[i] * v[0] * v[0] * v[2] * v[2];
    }
    REQUIRE(std::abs(acc - 4.0 * std::numbers::pi / 15.0) < 1e-11 * (4.0 * std::numbers::pi / 15.0 + 1));

    // cos(4 theta) on the circle integrates to zero exactly for 2L > 4.
    const auto c = sphere_grid<2>(8);
    double acc2 = 0;
    for (int i = 0; i < c.size(); ++i) {
        const double th = std::atan2(c.nodes[i][1], c.nodes[i][0]);
        acc2 += c.weights[i] * std::cos(4.0 * th);
    }
    REQUIRE(std::abs(acc2) < 1e-12);
}

TEST_CASE("orthonormal complement is orthonormal and perpendicular") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 50; ++trial) {
        Vec<3> b{gauss(rng), gauss(rng), gauss(rng)};
        b = normalized(b);
        const auto basis = orthonormal_complement(b);
        REQUIRE(basis.size() == 2);
        REQUIRE(std::abs(dot(basis[0], b)) < 1e-13);
        REQUIRE(std::abs(dot(basis[1], b)) < 1e-13);
        REQUIRE(std::abs(dot(basis[0], basis[1])) < 1e-13);
        REQUIRE(std::abs(norm(basis[0]) - 1.0) < 1e-13);
        REQUIRE(std::abs(norm(basis[1]) - 1.0) < 1e-13);
    }
    // Near-pole directions stay stable.
    const auto near_pole = orthonormal_complement(normalized(Vec<3>{1e-9, 0.0, 1.0}));
    REQUIRE(std::abs(norm(near_pole[0]) - 1.0) < 1e-12);
}
