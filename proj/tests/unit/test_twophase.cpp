#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bellman2d/errors.hpp"
#include "bellman2d/twophase.hpp"

using namespace bellman2d;

TEST_CASE("flux law evaluation") {
    const FluxLaw g2 = FluxLaw::bellman_reduced(2.0);
    CHECK(flux_eval(g2, 1.0, {0, 1}) == doctest::Approx(2.0));
    for (double m : {1.5, 3.0, 7.0}) CHECK(flux_eval(FluxLaw::bellman_reduced(m), 0.8, {1, 0}) == doctest::Approx(0.8));
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(flux_eval(FluxLaw::bellman_reduced(3.0), 3.0, {r, r}) == doctest::Approx(6.0));
    CHECK_THROWS_AS(flux_eval(g2, -1.0, {0, 1}), ValidationError);
    CHECK_THROWS_AS(flux_eval(g2, 1.0, {0, 2}), ValidationError);
}

TEST_CASE("rotated and operator-pair flux laws agree") {
    const double theta = 15.0 * std::numbers::pi / 180.0;
    const BellmanProblem p = BellmanProblem::reduced(3.0, theta);
    const FluxLaw reduced = FluxLaw::for_problem(p);
    const FluxLaw pair = FluxLaw::operator_pair(p.op1.A(), p.op2.A());
    const Point eta = p.anisotropy_axis();
    CHECK(reduced(1.0, eta) == doctest::Approx(3.0));
    for (double a = 0.0; a < 6.3; a += 0.37) {
        const Point nu{std::cos(a), std::sin(a)};
        CHECK(reduced(0.6, nu) == doctest::Approx(pair(0.6, nu)).epsilon(1e-12));
        CHECK(reduced.d_db(0.6, nu) == doctest::Approx(reduced(1.0, nu)).epsilon(1e-12));
    }
    const Point nu{0.6, 0.8};
    CHECK(*reduced.inverse(reduced(0.9, nu), nu) == doctest::Approx(0.9));
    CHECK_FALSE(reduced.inverse(-1.0, nu).has_value());
}

TEST_CASE("flux law derivatives and certificates") {
    const FluxLaw g = FluxLaw::bellman_reduced(2.0);
    // d/dnu of (1 + nu2^2) b at nu = (cos t, sin t) is 2 b sin t cos t.
    const double t = 0.5;
    CHECK(g.d_dnu(1.3, {std::cos(t), std::sin(t)}) == doctest::Approx(2.0 * 1.3 * std::sin(t) * std::cos(t)));
    const FluxLaw::Certificate c = g.certify();
    CHECK(c.monotone);
    CHECK(c.coercive);
    const FluxLaw wobbly =
        FluxLaw::custom([](double b, Point) { return b + 0.8 * std::sin(5.0 * b); }, [](double b) { return 0.1 * b; });
    CHECK_FALSE(wobbly.certify(10.0).monotone);
    const FluxLaw custom = FluxLaw::custom([](double b, Point nu) { return (2.0 + nu.x) * b; }, [](double b) { return b; });
    CHECK(custom.d_db(1.0, {1, 0}) == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(*custom.inverse(6.0, {1, 0}) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("two-plane solutions") {
    const TwoPlaneSolution p{{0, 0}, {0, 1}, 2.0, 1.0};
    CHECK(two_plane_eval(p, {0.7, 0.0}) == 0.0);
    CHECK(two_plane_eval(p, {0.0, 0.5}) == doctest::Approx(1.0));
    CHECK(two_plane_eval(p, {0.3, -0.5}) == doctest::Approx(-0.5));
    const TwoPlaneSolution q = make_two_plane(FluxLaw::bellman_reduced(3.0), {0.1, 0}, {0, 1}, 0.5);
    CHECK(q.a == doctest::Approx(1.5));
    CHECK_THROWS_AS(make_two_plane(FluxLaw::bellman_reduced(3.0), {0, 0}, {0, 1}, 0.0), ValidationError);
    CHECK_THROWS_AS(make_two_plane(FluxLaw::bellman_reduced(3.0), {0, 0}, {1, 1}, 1.0), ValidationError);
}

TEST_CASE("tangent two-plane") {
    const Grid2D g = Grid2D::make({0, 0}, 1.0, 65);
    const FluxLaw law = FluxLaw::bellman_reduced(2.0);
    const ScalarField2D u = sample([](Point x) { return x.y > 0 ? 2.0 * x.y : x.y; }, g);
    // Node (0, -0.25).
    const auto t = tangent_two_plane(u, g.mid(), g.mid() - 8, law);
    REQUIRE(t.has_value());
    CHECK(t->a == doctest::Approx(2.0));
    CHECK(t->b == doctest::Approx(1.0));
    CHECK(t->nu.y == doctest::Approx(1.0));
    CHECK(std::abs(t->nu.x) < 1e-12);

    const double ang = 0.3;
    const TwoPlaneSolution p0 = make_two_plane(law, {0.05, -0.02}, {std::cos(ang), std::sin(ang)}, 0.7);
    const ScalarField2D up = sample([&](Point x) { return p0(x); }, g);
    const auto tp = tangent_two_plane(up, g.mid() + 10, g.mid() + 6, law);
    REQUIRE(tp.has_value());
    CHECK(tp->a == doctest::Approx(p0.a).epsilon(1e-10));
    CHECK(tp->b == doctest::Approx(p0.b).epsilon(1e-10));
    CHECK(tp->nu.x == doctest::Approx(p0.nu.x).epsilon(1e-10));
    for (int k = 0; k < g.n(); k += 9) CHECK((*tp)(g.node(k, 3)) == doctest::Approx(p0(g.node(k, 3))).epsilon(1e-9));

    const ScalarField2D flat = sample([](Point) { return 0.3; }, g);
    CHECK_FALSE(tangent_two_plane(flat, 20, 20, law).has_value());
    CHECK_THROWS_AS(tangent_two_plane(flat, 0, 20, law), ValidationError);
}

TEST_CASE("comparison functions") {
    CHECK(comparison_eval(PhiParabolic{3.0}, {0, 0}) == 0.0);
    CHECK(comparison_eval(LineFamily{1.0}, {0, 1}) == 0.0);
    CHECK(comparison_eval(PhiParabolic{10.0}, {0, 0.1}) == doctest::Approx(0.2));
    CHECK(comparison_eval(PsiTwoPhase{0.0, 2.0, 3.0}, {0, -0.1}) == doctest::Approx(-0.2));
    CHECK(comparison_eval(PsiTwoPhase{0.0, 2.0, 3.0}, {0, 0.1}) == doctest::Approx(0.3));
    CHECK(parabolic_constant(1.0, 2.0) >= 1.5 * 2.0 / 1.0);
    CHECK_THROWS_AS(parabolic_constant(2.0, 1.0), ValidationError);
}

TEST_CASE("subsolution checks") {
    const BellmanProblem p = BellmanProblem::reduced(2.0);
    const FluxLaw law = FluxLaw::for_problem(p);
    const Grid2D g = Grid2D::make({0, 0}, 1.0, 129);
    const Window w = Window::centered(g, {0, 0}, 0.25);
    const double C = parabolic_constant(p.lambda(), p.Lambda());
    const SubsolutionReport phi = subsolution_check(PhiParabolic{C}, p, law, w);
    CHECK(phi.passed);
    CHECK(phi.operator_margin >= 0.0);
    CHECK(phi.nodes_checked > 0);
    const SubsolutionReport phi0 = subsolution_check(PhiParabolic{0.0}, p, law, w);
    CHECK_FALSE(phi0.passed);
    // L1 (x2 - x1^2) = -2.
    CHECK(phi0.operator_margin == doctest::Approx(-2.0));
    const SubsolutionReport psi = subsolution_check(PsiTwoPhase{C, 1.0, law.omega(1.0)}, p, law, w);
    CHECK(psi.passed);
    REQUIRE(psi.slope_margin.has_value());
    CHECK(*psi.slope_margin > 0.0);
    CHECK(psi.crossings_checked > 0);
    // a+ above G(gamma, nu) breaks the slope condition.
    CHECK_FALSE(subsolution_check(PsiTwoPhase{C, 1.0, 3.0}, p, law, w).passed);
    CHECK_THROWS_AS(subsolution_check(PhiParabolic{C}, p, law, Window{g, 0, 10, 5, 10}), ValidationError);
}

TEST_CASE("one-dimensional profile") {
    // m = 1 makes the slope constant: g(t) = t.
    const GProfile lin = g_profile_solve(1.0, 0.4, 0.0, 1e-3, {-1.0, 1.0});
    for (double t : {-0.9, -0.3, 0.0, 0.45, 0.99}) CHECK(lin(t) == doctest::Approx(t).epsilon(1e-12));
    CHECK(lin.step <= 1e-4 * 2.0 + 1e-18);

    const double m = 2.0;
    for (double nu2sq : {0.0, 0.25, 1.0}) {
        const GProfile g = g_profile_solve(m, nu2sq, 0.0, 1e-4, {-1.0, 1.0});
        const double ratio = g_profile_slope(g, 0.01) / g_profile_slope(g, -0.01 - g.step);
        CHECK(ratio == doctest::Approx(1.0 - nu2sq + m * nu2sq).epsilon(1e-6));
    }

    const GProfile convex = g_profile_solve(m, 1.0, 0.1, 0.2, {-1.0, 1.0});
    double min_second = 1e9, max_slope = 0.0;
    for (std::size_t k = 1; k + 1 < convex.g.size(); ++k) {
        min_second = std::min(min_second, convex.g[k + 1] - 2.0 * convex.g[k] + convex.g[k - 1]);
        max_slope = std::max(max_slope, (convex.g[k + 1] - convex.g[k]) / convex.step);
    }
    CHECK(min_second > 0.0);
    CHECK(max_slope < 2.0);

    CHECK_THROWS_AS(lin(1.5), ValidationError);
    CHECK_THROWS_AS(g_profile_solve(m, 0.5, 0.0, 1e-3, {0.1, 1.0}), ValidationError);
    CHECK_THROWS_AS(g_profile_solve(m, 0.5, -0.1, 1e-3, {-1.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(g_profile_solve(m, 0.5, 2.0, 1e-3, {-1.0, 1.0}), ValidationError);
}

TEST_CASE("maximum principle detector") {
    const Grid2D g = Grid2D::make({0, 0}, 1.0, 65);
    const FluxLaw law = FluxLaw::bellman_reduced(2.0);
    const TwoPlaneSolution p = make_two_plane(law, {0.0, 0.1}, {0.6, 0.8}, 1.0);
    const Window w = Window::centered(g, {0, 0}, 0.5);
    const ScalarField2D below = sample([&](Point x) { return p(x) - 0.01; }, g);
    const MaximumPrincipleReport ok = maximum_principle_check(below, p, w, 1e-9);
    CHECK(ok.boundary_dominated);
    CHECK(ok.holds);
    CHECK(ok.max_violation <= 0.0);

    const ScalarField2D bump = sample([&](Point x) { return p(x) + 0.2 * std::exp(-200.0 * dot(x, x)); }, g);
    const Window inner = Window::centered(g, {0, 0}, 0.75);
    const MaximumPrincipleReport bad = maximum_principle_check(bump, p, inner, 1e-9);
    CHECK(bad.boundary_dominated);
    CHECK_FALSE(bad.holds);
    REQUIRE(bad.first_violation.has_value());
    CHECK(bad.max_violation > 0.1);
    CHECK(comparison_tolerance(1e-9, 0.01) == doctest::Approx(5.0 * (1e-9 + 1e-4)));
}
