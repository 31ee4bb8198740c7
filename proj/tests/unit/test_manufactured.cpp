#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bellman2d/errors.hpp"
#include "bellman2d/manufactured.hpp"

using namespace bellman2d;

TEST_CASE("glued cubic closed form") {
    const ExactSolution s = GluedCubic{2.0, 1.0, 0.0};
    CHECK(exact_value(s, {0.0, 0.5}) == doctest::Approx(1.0 / 24.0).epsilon(1e-15));
    CHECK(exact_eval(s, {0.0, -0.5}).hess.a22 == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(exact_eval(s, {0.3, 0.5}).hess.a22 == doctest::Approx(1.0).epsilon(1e-15));
    const Derivatives d = exact_eval(QuadraticSaddle{}, {0.3, -0.7}, DerivativeOrder::Hess);
    CHECK(d.hess == SymMatrix2{-2.0, 0.0, 2.0});
}

TEST_CASE("third derivative jumps by the factor m across the glue line") {
    for (double m : {1.5, 2.0, 4.0}) {
        const GluedCubic s{m, 0.7, 0.0};
        const double upper = exact_eval(s, {0.2, 0.1}).third[3];
        const double lower = exact_eval(s, {0.2, -0.1}).third[3];
        CHECK(upper / lower == doctest::Approx(m).epsilon(1e-14));
        const Derivatives on = exact_eval(s, {0.2, 0.0});
        REQUIRE(on.third_other.has_value());
        CHECK(on.third[3] / (*on.third_other)[3] == doctest::Approx(m).epsilon(1e-14));
    }
}

TEST_CASE("rotation covariance") {
    const double theta = 0.4;
    const GluedCubic rotated{3.0, 0.5, theta};
    const GluedCubic plain{3.0, 0.5, 0.0};
    for (Point y : {Point{0.3, 0.2}, Point{-0.6, -0.1}, Point{0.05, 0.9}}) {
        const Point x{std::cos(theta) * y.x - std::sin(theta) * y.y, std::sin(theta) * y.x + std::cos(theta) * y.y};
        CHECK(exact_value(rotated, x) == doctest::Approx(exact_value(plain, y)).epsilon(1e-14));
    }
}

TEST_CASE("glued phases agree to second order on the glue line") {
    const GluedCubic s{4.0, 1.0, 0.3};
    const Point x{std::cos(0.3) * 0.4, std::sin(0.3) * 0.4};
    const Derivatives up = glued_phase_eval(s, x, +1);
    const Derivatives dn = glued_phase_eval(s, x, -1);
    CHECK(up.value == doctest::Approx(dn.value));
    CHECK(up.grad.x == doctest::Approx(dn.grad.x));
    CHECK(up.hess.a12 == doctest::Approx(dn.hess.a12));
    CHECK_THROWS_AS(glued_phase_eval(s, x, 0), ValidationError);
}

TEST_CASE("oracle check") {
    for (const CatalogEntry& e : manufactured_catalog()) {
        CAPTURE(e.name);
        const OracleReport r = oracle_check(e.solution, e.problem);
        CHECK(r.residual_max <= 1e-12);
        CHECK(r.value_defect <= 1e-12);
        CHECK(r.grad_defect <= 1e-12);
        CHECK(r.hess_defect <= 1e-12);
        CHECK(r.samples >= 10000);
    }
    const double theta = 15.0 * std::numbers::pi / 180.0;
    CHECK(oracle_check(GluedCubic{3.0, 0.5, theta}, BellmanProblem::reduced(3.0, theta)).residual_max <= 1e-13);
    CHECK(oracle_check(QuadraticSaddle{1.0}, BellmanProblem::reduced(1.0)).residual_max == 0.0);
    // Wrong operator pair and non-solutions are rejected.
    CHECK_THROWS_AS(oracle_check(GluedCubic{3.0, 0.5, 0.0}, BellmanProblem::reduced(2.0)), ValidationError);
    CHECK_THROWS_AS(oracle_check(CustomPolynomial{{{1.0, 0, 2}}}, BellmanProblem::reduced(2.0)), NumericalError);
}

TEST_CASE("catalog bookkeeping") {
    const auto catalog = manufactured_catalog();
    CHECK(catalog.size() >= 9);
    CHECK(describe(GluedCubic{2.0, 1.0, 0.0}) == "glued_cubic(m=2, b=1, rotation=0)");
    CHECK(*matching_problem(GluedCubic{4.0, 1.0, 0.0}).m == 4.0);
    CHECK(exact_value(CustomPolynomial{{{2.0, 1, 2}, {-1.0, 0, 0}}}, {0.5, 2.0}) == doctest::Approx(3.0));
}
