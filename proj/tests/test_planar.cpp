#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "conetomo/planar.hpp"

using namespace conetomo;

namespace {

// Independent oracle for the scaled projective data:
// w(a, p) = int_0^inf f(a + t p, t) t^k dt by a dense midpoint rule.
double w_oracle(const ScalarField<2>& f, double a, double p, int k, int samples = 200000) {
    Vec<2> lo, hi;
    f.bounding_box(lo, hi);
    const double t0 = std::max(0.0, lo[1]), t1 = hi[1];
    if (!(t1 > t0)) return 0.0;
    const double dt = (t1 - t0) / samples;
    double acc = 0;
    for (int i = 0; i < samples; ++i) {
        const double t = t0 + (i + 0.5) * dt;
        acc += f.eval(Vec<2>{a + t * p, t}) * std::pow(t, k);
    }
    return acc * dt;
}

ScalarField<2> planar_phantom() { return make_bump<2>(Vec<2>{0.0, 1.5}, 0.5, 1.0); }

}  // namespace

TEST_CASE("projective data matches the x_n-parameterized oracle") {
    const auto f = planar_phantom();
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int k : {0, 1}) {
        const PlanarBeamEvaluator<2> ev(f, k);
        for (int trial = 0; trial < 12; ++trial) {
            const double a = 2.0 * uni(rng), p = 1.5 * uni(rng);
            const double got = ev.w(Vec<1>{a}, Vec<1>{p});
            const double ref = w_oracle(f, a, p, k);
            REQUIRE(std::abs(got - ref) <= 1e-8 * std::max(1.0, std::abs(ref)));
        }
    }
}

TEST_CASE("projective data translates with the phantom") {
    const auto f = planar_phantom();
    const auto g = make_bump<2>(Vec<2>{0.4, 1.5}, 0.5, 1.0);  // shifted by 0.4 in x_bar
    const PlanarBeamEvaluator<2> ef(f, 0), eg(g, 0);
    for (double a : {-0.8, 0.0, 1.2}) {
        for (double p : {-0.3, 0.2}) {
            REQUIRE(eg.w(Vec<1>{a}, Vec<1>{p}) ==
                    Catch::Approx(ef.w(Vec<1>{a - 0.4}, Vec<1>{p})).margin(1e-12));
        }
    }
}

TEST_CASE("projective data vanishes for lines missing the support") {
    const auto f = planar_phantom();
    const PlanarBeamEvaluator<2> ev(f, 0);
    // Line x = a + t p stays right of |x| <= 0.5 for t in [1, 2].
    REQUIRE(ev.w(Vec<1>{2.0}, Vec<1>{0.0}) == 0.0);
    REQUIRE(ev.w(Vec<1>{2.0}, Vec<1>{-0.4}) == 0.0);
    REQUIRE(ev.w(Vec<1>{2.0}, Vec<1>{-1.0}) != 0.0);
}

TEST_CASE("support stays inside the default p grid") {
    const auto f = planar_phantom();
    const PlanarBeamEvaluator<2> ev(f, 0);
    const auto pd = projective_data(ev, 2.0, 65, 4.0, 256);
    REQUIRE(support_leak_ratio(pd) == 0.0);  // support exactly misses the ring
}

TEST_CASE("fourier transform of w: zero frequency, zero data, Parseval") {
    const auto f = planar_phantom();
    const PlanarBeamEvaluator<2> ev(f, 0);
    const auto pd = projective_data(ev, 2.0, 17, 4.0, 128);
    const auto sw = fourier_w(pd);

    // Zero frequency equals the p integral.
    const std::int64_t xf0 = 64;  // xi index np/2 <-> xi = 0
    for (std::int64_t af = 0; af < pd.a_count(); af += 5) {
        double j0 = 0;
        for (std::int64_t pf = 0; pf < pd.p_count(); ++pf) j0 += pd.at(af, pf);
        j0 *= pd.dp();
        REQUIRE(std::abs(sw.at(af, xf0) - std::complex<double>(j0, 0)) < 1e-12 * std::max(1.0, j0));
    }

    // Parseval: dp sum |w|^2 = (2 pi)^{-1} dxi sum |W|^2, exact identity of
    // the discrete construction.
    double lhs = 0, rhs = 0;
    for (std::int64_t af = 0; af < pd.a_count(); ++af) {
        for (std::int64_t pf = 0; pf < pd.p_count(); ++pf)
            lhs += pd.dp() * pd.at(af, pf) * pd.at(af, pf);
        for (std::int64_t xf = 0; xf < sw.xi_count(); ++xf)
            rhs += sw.dxi() * std::norm(sw.at(af, xf)) / (2.0 * std::numbers::pi);
    }
    REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-10));

    ProjectiveData<2> zero = pd;
    std::fill(zero.w.begin(), zero.w.end(), 0.0);
    const auto swz = fourier_w(zero);
    for (const auto& v : swz.W) REQUIRE(std::abs(v) == 0.0);
}

TEST_CASE("factorization entry is vacuous for n=2 and checked for n=3") {
    const auto f2 = planar_phantom();
    const PlanarBeamEvaluator<2> ev2(f2, 0);
    const auto pd2 = projective_data(ev2, 2.0, 9, 4.0, 64);
    ConsistencyReport r2;
    check_factorization(fourier_w(pd2), r2);
    REQUIRE(r2.find("factorization")->note == "vacuous (n=2)");
    REQUIRE(r2.find("factorization")->pass);

    const auto f3 = make_bump<3>(Vec<3>{0.0, 0.1, 1.5}, 0.5, 1.0);
    const PlanarBeamEvaluator<3> ev3(f3, 0);
    const auto pd3 = projective_data(ev3, 1.0, 9, 2.5, 96);
    ConsistencyReport r3;
    check_factorization(fourier_w(pd3), r3);
    INFO(r3.to_csv());
    REQUIRE(r3.find("factorization")->residual < 1e-4);

    // Synthetic violation: W(a, xi) = a . e with e fixed is not a function of
    // a . xi for xi not parallel to e.
    auto sw_bad = fourier_w(pd3);
    for (std::int64_t af = 0; af < sw_bad.a_count(); ++af)
        for (std::int64_t xf = 0; xf < sw_bad.xi_count(); ++xf)
            sw_bad.W[af * sw_bad.xi_count() + xf] = sw_bad.abar(af)[0];
    ConsistencyReport rbad;
    check_factorization(sw_bad, rbad);
    REQUIRE_FALSE(rbad.find("factorization")->pass);
}

TEST_CASE("pipeline h matches the closed form and is real") {
    const auto f = planar_phantom();
    for (int k : {0, 1}) {
        const PlanarBeamEvaluator<2> ev(f, k);
        const auto sh = build_h<2>(ev.row_source(), 4.0, 256, 64.0, 512, k);

        // Closed form h(t, p) = (-t)^{-k-2} f(-p/t, -1/t) for t < 0.
        const auto h_ref = [&](double t, double p) {
            if (t >= -1e-9) return 0.0;
            return std::pow(-t, -k - 2.0) * f.eval(Vec<2>{-p / t, -1.0 / t});
        };
        double sup_ref = 0, sup_err = 0;
        for (int l = 0; l < sh.nsig; ++l) {
            for (int j = 0; j < sh.np; ++j) {
                const double ref = h_ref(sh.t(l), sh.pbar(j)[0]);
                sup_ref = std::max(sup_ref, std::abs(ref));
                sup_err = std::max(sup_err, std::abs(sh.h_at(l, j) - ref));
            }
        }
        INFO("k=" << k << " sup_ref=" << sup_ref << " sup_err=" << sup_err);
        REQUIRE(sup_ref > 1.0);
        REQUIRE(sup_err <= 1e-3 * sup_ref);
        REQUIRE(sh.h_imag_max <= 1e-10 * sup_ref);

        // Support cone from the phantom box: residual passes; the estimated
        // cone agrees within a grid cell.
        const auto box = support_box(f);
        const SupportCone cone{box.m0(), box.M0(), box.cone_slope()};
        REQUIRE(h_support_residual(sh, cone) < 1e-4);
        const auto est = estimate_support_cone(sh);
        REQUIRE(std::abs(est.m0 - cone.m0) < 2.0 * sh.dt());
        REQUIRE(std::abs(est.M0 - cone.M0) < 2.0 * sh.dt());
        REQUIRE(est.R < cone.R + 2.0 * sh.dp());

        // An injected spike at t = +0.5 violates the support condition.
        auto bad = sh;
        const int l_pos = static_cast<int>(std::llround(0.5 / bad.dt())) + bad.nsig / 2;
        bad.h[l_pos * bad.xi_count() + bad.np / 2] = 10.0 * sup_ref;
        REQUIRE(h_support_residual(bad, cone) > 1e-2);
    }
}

TEST_CASE("reconstruction from h: zero data gives the zero field") {
    SpectralH<2> sh;
    sh.k = 0;
    sh.sigma_max = 8.0;
    sh.nsig = 64;
    sh.p_max = 2.0;
    sh.np = 32;
    sh.h.assign(static_cast<std::size_t>(sh.nsig) * sh.np, 0.0);
    const auto out = GridSpec<2>::centered_box(Vec<2>{-0.6, 0.9}, Vec<2>{0.6, 2.1}, 17);
    const auto rec = reconstruct_from_h(sh, 0, out);
    for (double v : rec.values) REQUIRE(v == 0.0);
}

TEST_CASE("moment conditions hold on clean data and break under corruption") {
    // Wider bump keeps the p-grid Riemann error below the tight J0 budget.
    const auto f = make_bump<2>(Vec<2>{0.0, 1.5}, 0.6, 1.0);
    const PlanarBeamEvaluator<2> ev(f, 0);
    const auto pd = projective_data(ev, 2.0, 65, 4.0, 256);

    ConsistencyReport rep;
    check_moment_condition(pd, 4, {Vec<1>{1.0}}, rep);
    INFO(rep.to_csv());
    REQUIRE(rep.find("moment_j0_spread")->residual < 1e-6);
    for (int m = 0; m <= 4; ++m)
        REQUIRE(rep.find("moment_deg" + std::to_string(m) + "_dir0")->residual < 1e-4);
    REQUIRE(rep.find("moment_scaling_identity")->residual < 1e-12);
    REQUIRE(rep.overall_pass());

    // J_m(a, lambda xi) = lambda^m J_m(a, xi) by definition.
    const auto j3 = moments(pd, Vec<1>{1.0}, 3);
    const auto j3s = moments(pd, Vec<1>{2.0}, 3);
    for (std::size_t i = 0; i < j3.size(); ++i)
        REQUIRE(j3s[i] == Catch::Approx(8.0 * j3[i]).margin(1e-12));

    auto bad = pd;
    corrupt_multiplicative_sin(bad, 0.05, 3.0, 0);
    ConsistencyReport rbad;
    check_moment_condition(bad, 4, {Vec<1>{1.0}}, rbad);
    INFO(rbad.to_csv());
    REQUIRE_FALSE(rbad.overall_pass());
    REQUIRE(rbad.find("moment_j0_spread")->residual >
            10.0 * rep.find("moment_j0_spread")->residual);

    ProjectiveData<2> zero = pd;
    std::fill(zero.w.begin(), zero.w.end(), 0.0);
    ConsistencyReport rz;
    check_moment_condition(zero, 4, {Vec<1>{1.0}}, rz);
    REQUIRE(rz.overall_pass());
}

TEST_CASE("n=3 moments: polynomial fits and equal-sigma invariance") {
    const auto f = make_bump<3>(Vec<3>{0.0, 0.1, 1.5}, 0.5, 1.0);
    const PlanarBeamEvaluator<3> ev(f, 0);
    const auto pd = projective_data(ev, 1.0, 9, 2.5, 96);
    ConsistencyReport rep;
    check_moment_condition(pd, 4,
                           {axis_unit<2>(0), axis_unit<2>(1), normalized(Vec<2>{1.0, 1.0})}, rep,
                           1e-4);
    INFO(rep.to_csv());
    for (const auto& e : rep.entries)
        if (e.name.rfind("moment_deg", 0) == 0) REQUIRE(e.residual < 1e-4);
    REQUIRE(rep.find("moment_equal_sigma")->residual < 1e-4);
}

TEST_CASE("mismatched weight order is detected") {
    // Data generated with k = 1 but scaled as if k = 0: the projective data
    // loses the moment structure (J0 becomes position dependent).
    const auto f = planar_phantom();
    ProjectiveData<2> pd;
    pd.k = 0;
    pd.a_max = 2.0;
    pd.na = 33;
    pd.p_max = 4.0;
    pd.np = 256;
    pd.w.assign(static_cast<std::size_t>(pd.a_count() * pd.p_count()), 0.0);
    for (std::int64_t af = 0; af < pd.a_count(); ++af) {
        const double a = pd.abar(af)[0];
        for (std::int64_t pf = 0; pf < pd.p_count(); ++pf) {
            const double p = pd.pbar(pf)[0];
            const Vec<2> dir{p, 1.0};
            const double vn = 1.0 / norm(dir);
            // v_n^{0+1} scaling applied to k = 1 beam data.
            pd.at(af, pf) = vn * divergent_beam(f, Vec<2>{a, 0.0}, vn * dir, 1);
        }
    }
    ConsistencyReport rep;
    check_moment_condition(pd, 4, {Vec<1>{1.0}}, rep);
    INFO(rep.to_csv());
    REQUIRE_FALSE(rep.overall_pass());
    REQUIRE(rep.find("moment_j0_spread")->residual > 1e-2);
}
